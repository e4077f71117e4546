"""A tour of the grasping simulator.

The environment is a 6-joint kinematic arm with a wrist pitch and gripper
aperture, chasing a ball or bottle on the table plane. Rewards decompose into
four terms per step; episodes end on success, collision, contact, or after
100 steps.
"""
import numpy as np

from grasprl.env import ACT_DIM, GraspEnv, OBS_DIST

env = GraspEnv("ball")
state, obs = env.reset(seed=7)
print("observation layout: q[6] | hand[3] | normal[3] | object[3] | "
      "rel[3] | aperture | dist")
print("initial distance to object:", round(float(obs[OBS_DIST]), 4), "m")
print("object center:", np.round(state.nu_object, 3))

# The reward每 step is distance + smoothness + event + pose. Drive the arm
# with a constant small action and watch the decomposition.
action = np.zeros(ACT_DIM)
action[1] = 0.4   # pitch the shoulder forward
action[7] = -0.5  # close the gripper
print(f"\n{'t':>3} {'dist':>7} {'smooth':>9} {'pose':>7} {'event':>7} {'total':>9}")
for t in range(8):
    state, obs, breakdown, done = env.step(action)
    print(f"{t:>3} {obs[OBS_DIST]:>7.3f} {breakdown.smooth_term:>9.2f} "
          f"{breakdown.pose_term:>7.2f} {breakdown.event_term:>7.0f} "
          f"{breakdown.total:>9.2f}")
    if done:
        break

# The smoothness term telescopes: its episode sum (divided by its weight)
# equals the total drop in squared distance to the target observation.
env2 = GraspEnv("bottle")
state2, obs2 = env2.reset(seed=3)
initial_sq = state2.prev_dist_sq
total_smooth = 0.0
rng = np.random.default_rng(0)
done = False
while not done:
    state2, obs2, b, done = env2.step(rng.uniform(-0.5, 0.5, ACT_DIM))
    total_smooth += b.smooth_term
final_sq = float(np.sum((obs2 - state2.target_obs) ** 2))
print("\ntelescoped smoothness / weight:", round(total_smooth / 1000.0, 6))
print("squared-distance drop         :", round(initial_sq - final_sq, 6))
print("episode ended with event      :", state2.terminal_event or "timeout")
