"""Open-loop reference playback, used as a cheap stand-in expert for smoke runs."""

import numpy as np

from ..motion import MotionLibrary
from ..sim.schemas import COMMAND_SLICE, RobotModel


class ScriptedGaitPolicy:
    """Replays the reference clip whose speed is closest to each env's command."""

    def __init__(self, library: MotionLibrary, model: RobotModel | None = None):
        self.library = library
        self.model = model or RobotModel()
        self.default_pose = np.asarray(self.model.default_pose)
        self.frames = np.zeros(0, dtype=np.int64)

    def reset(self, num_envs: int) -> None:
        self.frames = np.zeros(num_envs, dtype=np.int64)

    def reset_envs(self, ids) -> None:
        self.frames[np.asarray(ids, dtype=np.int64)] = 0

    def act(self, obs: np.ndarray) -> np.ndarray:
        obs = np.atleast_2d(obs)
        if self.frames.shape[0] != obs.shape[0]:
            self.reset(obs.shape[0])
        actions = np.zeros((obs.shape[0], len(self.default_pose)))
        for i, v in enumerate(obs[:, COMMAND_SLICE.start]):
            clip = self.library.closest_clip(float(v))
            target = clip.joint_pos[self.frames[i] % len(clip)]
            actions[i] = (target - self.default_pose) / self.model.action_scale
        self.frames += 1
        return actions
