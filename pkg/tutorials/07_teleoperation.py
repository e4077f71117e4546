"""Teleoperation loopback: drive the serve endpoint with the scripted expert.

The same WebSocket protocol serves the browser panel (frontend/) and scripted
clients. Here a scripted client connects, steers two episodes to success, and
the recorded trajectories come back as ordinary demonstration files.

To drive it by hand instead:
    grasprl serve --port 8765 --task ball
    # then open frontend/index.html (after `npm run build` in frontend/)
"""
import socket

from grasprl.demos import DemoSet
from grasprl.teleop import ScriptedTeleopClient, TeleopServer

with socket.socket() as s:
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]

server = TeleopServer(port, "ball", seed=0, out_dir="teleop_demos",
                      tick_hz=40.0)
thread = server.start_background()
print(f"server on ws://127.0.0.1:{port}")

client = ScriptedTeleopClient(f"ws://127.0.0.1:{port}", "ball")
saved = client.run_episodes([11, 12])
print("saved trajectories:", saved)

for path in saved:
    demos = DemoSet.load(path)
    traj = demos.trajectories[0]
    print(f"  {path}: {len(traj.steps)} steps, source={traj.source!r}, "
          f"ends in {traj.steps[-1].event!r}")

server.shutdown()
thread.join(timeout=5)
