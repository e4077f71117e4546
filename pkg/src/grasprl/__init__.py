"""grasprl: a kinematic arm-hand grasping simulator with two-phase policy
training (behavior-cloning pretraining, then soft actor-critic with a
contrastive projection head) and a teleoperation path for human demonstrations.
"""

from .autodiff import Tape, Tensor
from .bc import BcConfig, pretrain
from .contrastive import ClConfig, ProjectionHead, contrastive_loss
from .demos import DemoSet, Trajectory
from .env import GraspEnv, RewardWeights, SceneConfig
from .expert import ScriptedExpert, collect_demos, scripted_expert
from .nn import Adam, Mlp, load_checkpoint, polyak_update, save_checkpoint
from .sac import PolicyNet, QNet, ReplayBuffer, SacConfig
from .training import RunConfig, ablation, evaluate_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "Adam", "BcConfig", "ClConfig", "DemoSet", "GraspEnv", "Mlp",
    "PolicyNet", "ProjectionHead", "QNet", "ReplayBuffer", "RewardWeights",
    "RunConfig", "SacConfig", "SceneConfig", "ScriptedExpert", "Tape",
    "Tensor", "Trajectory", "ablation", "collect_demos", "contrastive_loss",
    "evaluate_checkpoint", "load_checkpoint", "polyak_update", "pretrain",
    "save_checkpoint", "scripted_expert", "train",
]
