"""BVH motion-capture parsing, writing, joint selection, and kinematics.

A BVH file has a HIERARCHY section (nested joints with offsets and channel
declarations) and a MOTION section (frame count, frame time, one row of
channel values per frame). Motion clips here hold rotation channels only,
3 values per joint; root translation channels are consumed on parse and
written back as zeros, since the pipeline models joint angles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rotations
from .errors import (
    BvhParseError,
    InvalidInputError,
    MissingJointError,
    UnsupportedRatioError,
)

REP_EULER = "euler_deg"
REP_EXPMAP = "expmap"

_POSITION_CHANNELS = {"Xposition", "Yposition", "Zposition"}
_ROTATION_CHANNELS = {"Xrotation", "Yrotation", "Zrotation"}


@dataclass
class BvhNode:
    """One entry of a hierarchy: a joint, or an end site (empty channels)."""

    name: str
    parent: int | None
    offset: np.ndarray  # (3,) cm
    channels: tuple[str, ...] = ()

    @property
    def is_end_site(self) -> bool:
        return len(self.channels) == 0

    @property
    def rotation_order(self) -> str:
        """Channel order string, e.g. 'ZXY', from the rotation channels."""
        return "".join(c[0] for c in self.channels if c in _ROTATION_CHANNELS)


@dataclass
class JointHierarchy:
    """Skeleton tree in topological order (parents before children).

    ``nodes`` holds joints and end sites; end sites carry no channels and do
    not contribute to motion width. Exactly one node is the root.
    """

    nodes: list[BvhNode]

    def __post_init__(self):
        roots = [n for n in self.nodes if n.parent is None]
        if len(roots) != 1:
            raise InvalidInputError(f"hierarchy must have exactly 1 root, got {len(roots)}")
        for i, node in enumerate(self.nodes):
            if node.parent is not None and not 0 <= node.parent < i:
                raise InvalidInputError(f"node {node.name!r} breaks topological order")
            if not np.all(np.isfinite(node.offset)):
                raise InvalidInputError(f"node {node.name!r} has a non-finite offset")

    @property
    def joint_indices(self) -> list[int]:
        return [i for i, n in enumerate(self.nodes) if not n.is_end_site]

    @property
    def joint_names(self) -> list[str]:
        return [self.nodes[i].name for i in self.joint_indices]

    @property
    def n_joints(self) -> int:
        return len(self.joint_indices)

    @property
    def channel_count(self) -> int:
        return sum(len(n.channels) for n in self.nodes)

    def children_of(self, index: int) -> list[int]:
        return [i for i, n in enumerate(self.nodes) if n.parent == index]


@dataclass
class MotionClip:
    """Frame-rate-stamped per-joint rotation triples.

    ``frames`` is (T, 3*J); ``rep`` tags the representation: Euler degrees in
    each joint's declared channel order, or exponential-map radians.
    """

    fps: float
    frames: np.ndarray
    rep: str = REP_EULER

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.fps <= 0:
            raise InvalidInputError(f"fps must be positive, got {self.fps}")
        if self.frames.ndim != 2 or self.frames.shape[1] % 3 != 0:
            raise InvalidInputError(f"frames must be (T, 3*J), got {self.frames.shape}")
        if self.rep not in (REP_EULER, REP_EXPMAP):
            raise InvalidInputError(f"unknown representation {self.rep!r}")
        if not np.all(np.isfinite(self.frames)):
            raise InvalidInputError("frames contain non-finite values")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_joints(self) -> int:
        return self.frames.shape[1] // 3

    def joint(self, j: int) -> np.ndarray:
        """View of joint j's rotation triples, shape (T, 3)."""
        return self.frames[:, 3 * j : 3 * j + 3]


#: Default 15-joint upper-body selection, Trinity-style naming:
#: 4 spine, 2 neck, 1 head, 2 shoulders, 6 arm joints (3 per side).
DEFAULT_JOINT_NAMES = (
    "Spine", "Spine1", "Spine2", "Spine3",
    "Neck", "Neck1",
    "Head",
    "RightShoulder", "LeftShoulder",
    "RightArm", "RightForeArm", "RightHand",
    "LeftArm", "LeftForeArm", "LeftHand",
)

_GROUP_SIZES = {"spine": 4, "neck": 2, "head": 1, "shoulders": 2, "arms": 6}


@dataclass(frozen=True)
class JointSelection:
    """The 15 retained upper-body joints, grouped by body part."""

    spine: tuple[str, ...]
    neck: tuple[str, ...]
    head: tuple[str, ...]
    shoulders: tuple[str, ...]
    arms: tuple[str, ...]

    def __post_init__(self):
        for group, size in _GROUP_SIZES.items():
            names = getattr(self, group)
            if len(names) != size:
                raise InvalidInputError(
                    f"selection group {group!r} needs {size} joints, got {len(names)}"
                )
        if len(set(self.names)) != 15:
            raise InvalidInputError("selection must name 15 distinct joints")

    @property
    def names(self) -> tuple[str, ...]:
        return self.spine + self.neck + self.head + self.shoulders + self.arms

    @classmethod
    def from_names(cls, names) -> "JointSelection":
        names = tuple(names)
        if len(names) != 15:
            raise InvalidInputError(f"selection must list 15 joints, got {len(names)}")
        return cls(names[0:4], names[4:6], names[6:7], names[7:9], names[9:15])

    @classmethod
    def default(cls) -> "JointSelection":
        return cls.from_names(DEFAULT_JOINT_NAMES)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


class _Lines:
    """Line cursor over BVH text, tracking 1-based line numbers."""

    def __init__(self, text: str):
        self._lines = text.splitlines()
        self._pos = 0

    def next(self) -> tuple[int, list[str]]:
        while self._pos < len(self._lines):
            self._pos += 1
            tokens = self._lines[self._pos - 1].split()
            if tokens:
                return self._pos, tokens
        raise BvhParseError("unexpected end of file", len(self._lines))

    @property
    def line(self) -> int:
        return self._pos


def _parse_floats(tokens: list[str], line: int, what: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError:
        raise BvhParseError(f"non-numeric {what}", line) from None


def _parse_node_block(lines: _Lines, nodes: list[BvhNode], parent: int | None,
                      name: str, is_end: bool) -> None:
    line, tokens = lines.next()
    if tokens != ["{"]:
        raise BvhParseError(f"expected '{{' after {name!r}", line)

    line, tokens = lines.next()
    if tokens[0] != "OFFSET" or len(tokens) != 4:
        raise BvhParseError("expected 'OFFSET x y z'", line)
    offset = _parse_floats(tokens[1:], line, "offset")

    channels: tuple[str, ...] = ()
    if not is_end:
        line, tokens = lines.next()
        if tokens[0] != "CHANNELS":
            raise BvhParseError("expected CHANNELS declaration", line)
        try:
            n_channels = int(tokens[1])
        except (IndexError, ValueError):
            raise BvhParseError("bad CHANNELS count", line) from None
        channels = tuple(tokens[2:])
        if len(channels) != n_channels:
            raise BvhParseError(
                f"CHANNELS declares {n_channels} but lists {len(channels)}", line
            )
        for ch in channels:
            if ch not in _POSITION_CHANNELS | _ROTATION_CHANNELS:
                raise BvhParseError(f"unknown channel {ch!r}", line)
        rot = [c for c in channels if c in _ROTATION_CHANNELS]
        if len(rot) != 3 or len({c[0] for c in rot}) != 3:
            raise BvhParseError(
                f"joint {name!r} must declare 3 distinct rotation channels", line
            )
        if set(channels) - _ROTATION_CHANNELS and parent is not None:
            raise BvhParseError(
                f"non-root joint {name!r} may not declare position channels", line
            )

    index = len(nodes)
    nodes.append(BvhNode(name, parent, offset, channels))

    while True:
        line, tokens = lines.next()
        if tokens == ["}"]:
            return
        if tokens[0] == "JOINT" and len(tokens) >= 2:
            _parse_node_block(lines, nodes, index, " ".join(tokens[1:]), is_end=False)
        elif tokens[:2] == ["End", "Site"]:
            _parse_node_block(lines, nodes, index, f"{name}_end", is_end=True)
        else:
            raise BvhParseError(f"unexpected token {tokens[0]!r} in joint block", line)


def parse_bvh(text: str) -> tuple[JointHierarchy, MotionClip]:
    """Parse BVH text into a hierarchy and a rotation clip (Euler degrees).

    Rotation values are stored in each joint's declared channel order. Root
    translation channels are consumed but not kept. Raises
    :class:`BvhParseError` with the offending line number on malformed input.
    """
    lines = _Lines(text)
    line, tokens = lines.next()
    if tokens != ["HIERARCHY"]:
        raise BvhParseError("expected HIERARCHY header", line)

    line, tokens = lines.next()
    if tokens[0] != "ROOT" or len(tokens) < 2:
        raise BvhParseError("expected ROOT declaration", line)

    nodes: list[BvhNode] = []
    _parse_node_block(lines, nodes, None, " ".join(tokens[1:]), is_end=False)
    hierarchy = JointHierarchy(nodes)

    line, tokens = lines.next()
    if tokens != ["MOTION"]:
        raise BvhParseError("expected MOTION section", line)

    line, tokens = lines.next()
    if tokens[0] != "Frames:" or len(tokens) != 2:
        raise BvhParseError("expected 'Frames: N'", line)
    try:
        n_frames = int(tokens[1])
    except ValueError:
        raise BvhParseError("bad frame count", line) from None
    if n_frames < 0:
        raise BvhParseError("negative frame count", line)

    line, tokens = lines.next()
    if tokens[:2] != ["Frame", "Time:"] or len(tokens) != 3:
        raise BvhParseError("expected 'Frame Time: t'", line)
    frame_time = _parse_floats(tokens[2:], line, "frame time")[0]
    if frame_time <= 0:
        raise BvhParseError("frame time must be positive", line)

    n_channels = hierarchy.channel_count
    rows = np.zeros((n_frames, n_channels), dtype=np.float64)
    for f in range(n_frames):
        line, tokens = lines.next()
        if len(tokens) != n_channels:
            raise BvhParseError(
                f"frame row {f} has {len(tokens)} values, expected {n_channels}", line
            )
        rows[f] = _parse_floats(tokens, line, "frame data")

    # Keep rotation triples only, in declared per-joint channel order.
    rot_cols = []
    col = 0
    for node in hierarchy.nodes:
        for ch in node.channels:
            if ch in _ROTATION_CHANNELS:
                rot_cols.append(col)
            col += 1
    frames = rows[:, rot_cols] if n_frames else np.zeros((0, 3 * hierarchy.n_joints))
    clip = MotionClip(fps=1.0 / frame_time, frames=frames, rep=REP_EULER)
    return hierarchy, clip


# ---------------------------------------------------------------------------
# Writing
# ---------------------------------------------------------------------------


def write_bvh(hierarchy: JointHierarchy, clip: MotionClip) -> str:
    """Render a hierarchy and an Euler-degree clip as BVH text.

    Values are emitted in 6-decimal fixed point, rotation channels in each
    joint's original order; root translation channels are written as zeros.
    """
    if clip.rep != REP_EULER:
        raise InvalidInputError(f"write_bvh needs Euler degrees, got {clip.rep!r}")
    if clip.n_joints != hierarchy.n_joints:
        raise InvalidInputError(
            f"clip has {clip.n_joints} joints, hierarchy has {hierarchy.n_joints}"
        )

    out: list[str] = ["HIERARCHY"]

    def emit(index: int, depth: int) -> None:
        node = hierarchy.nodes[index]
        pad = "\t" * depth
        if node.is_end_site:
            out.append(f"{pad}End Site")
        elif node.parent is None:
            out.append(f"{pad}ROOT {node.name}")
        else:
            out.append(f"{pad}JOINT {node.name}")
        out.append(f"{pad}{{")
        ox, oy, oz = node.offset
        out.append(f"{pad}\tOFFSET {ox:.6f} {oy:.6f} {oz:.6f}")
        if not node.is_end_site:
            out.append(f"{pad}\tCHANNELS {len(node.channels)} " + " ".join(node.channels))
        for child in hierarchy.children_of(index):
            emit(child, depth + 1)
        out.append(f"{pad}}}")

    root = next(i for i, n in enumerate(hierarchy.nodes) if n.parent is None)
    emit(root, 0)

    out.append("MOTION")
    out.append(f"Frames: {clip.n_frames}")
    out.append(f"Frame Time: {1.0 / clip.fps:.6f}")

    joint_of_node = {}
    for j, node_idx in enumerate(hierarchy.joint_indices):
        joint_of_node[node_idx] = j
    for f in range(clip.n_frames):
        values: list[float] = []
        for node_idx in hierarchy.joint_indices:
            node = hierarchy.nodes[node_idx]
            triple = clip.frames[f, 3 * joint_of_node[node_idx] : 3 * joint_of_node[node_idx] + 3]
            rot_iter = iter(triple)
            for ch in node.channels:
                values.append(0.0 if ch in _POSITION_CHANNELS else next(rot_iter))
        out.append(" ".join(f"{v:.6f}" for v in values))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Resampling and joint selection
# ---------------------------------------------------------------------------


def resample_fps(clip: MotionClip, target_fps: float) -> MotionClip:
    """Decimate a clip to ``target_fps``, keeping every (fps/target)-th frame.

    The source rate must be an integer multiple of the target rate; the
    pipeline's 60 -> 20 FPS conversion is exact decimation.
    """
    ratio = clip.fps / target_fps
    step = round(ratio)
    # tolerance absorbs frame-time text rounding (e.g. "0.0166667" -> 59.9999 FPS)
    if step < 1 or abs(ratio - step) > 1e-3:
        raise UnsupportedRatioError(
            f"cannot decimate {clip.fps:g} FPS to {target_fps:g} FPS "
            f"(non-integer ratio {ratio:g})"
        )
    return MotionClip(fps=target_fps, frames=clip.frames[::step].copy(), rep=clip.rep)


def select_joints(
    hierarchy: JointHierarchy, clip: MotionClip, selection: JointSelection
) -> tuple[JointHierarchy, MotionClip]:
    """Reduce a skeleton and clip to the 15 selected upper-body joints.

    Retained joints are re-parented to their nearest retained ancestor, with
    offsets accumulated over any pruned joints in between, so the zero pose
    keeps its world positions. The first selected joint in hierarchy order
    becomes the new root; its offset accumulates back to the original root.
    Retained joints that lose all their children gain a zero end site so the
    output is still valid BVH.
    """
    name_to_index = {n.name: i for i, n in enumerate(hierarchy.nodes) if not n.is_end_site}
    missing = [name for name in selection.names if name not in name_to_index]
    if missing:
        raise MissingJointError(f"joints not in hierarchy: {', '.join(missing)}")

    keep = sorted(name_to_index[name] for name in selection.names)
    keep_set = set(keep)

    def nearest_kept_ancestor(index: int) -> int | None:
        p = hierarchy.nodes[index].parent
        while p is not None and p not in keep_set:
            p = hierarchy.nodes[p].parent
        return p

    new_index: dict[int, int] = {}
    new_nodes: list[BvhNode] = []
    for old in keep:
        node = hierarchy.nodes[old]
        anc = nearest_kept_ancestor(old)
        offset = node.offset.copy()
        walk = node.parent
        while walk is not None and walk != anc:
            offset += hierarchy.nodes[walk].offset
            walk = hierarchy.nodes[walk].parent
        new_index[old] = len(new_nodes)
        new_nodes.append(
            BvhNode(node.name, None if anc is None else new_index[anc], offset, node.channels)
        )

    # End sites: keep those whose parent survives; add a zero one to joints
    # that had children but kept none.
    appended: list[BvhNode] = []
    for old in keep:
        children = hierarchy.children_of(old)
        kept_children = [c for c in children if c in keep_set]
        end_sites = [c for c in children if hierarchy.nodes[c].is_end_site]
        if end_sites:
            for e in end_sites:
                node = hierarchy.nodes[e]
                appended.append(BvhNode(node.name, new_index[old], node.offset.copy()))
        elif children and not kept_children:
            appended.append(
                BvhNode(f"{hierarchy.nodes[old].name}_end", new_index[old], np.zeros(3))
            )
    new_nodes.extend(appended)

    new_hierarchy = JointHierarchy(new_nodes)
    old_joint_pos = {idx: j for j, idx in enumerate(hierarchy.joint_indices)}
    cols = []
    for old in keep:
        j = old_joint_pos[old]
        cols.extend(range(3 * j, 3 * j + 3))
    new_clip = MotionClip(fps=clip.fps, frames=clip.frames[:, cols].copy(), rep=clip.rep)
    return new_hierarchy, new_clip


# ---------------------------------------------------------------------------
# Representation conversion
# ---------------------------------------------------------------------------


def clip_euler_to_expmap(hierarchy: JointHierarchy, clip: MotionClip,
                         fix_continuity: bool = True) -> MotionClip:
    """Convert an Euler-degree clip to exponential maps (radians).

    Each joint's declared channel order drives the conversion. With
    ``fix_continuity`` the per-joint sequences are re-picked to avoid jumps
    at the pi boundary.
    """
    if clip.rep != REP_EULER:
        raise InvalidInputError(f"expected Euler clip, got {clip.rep!r}")
    out = np.empty_like(clip.frames)
    for j, node_idx in enumerate(hierarchy.joint_indices):
        order = hierarchy.nodes[node_idx].rotation_order
        m = rotations.euler_to_expmap(clip.joint(j), order, degrees=True)
        if fix_continuity and clip.n_frames > 1:
            m = rotations.expmap_continuity_fix(m)
        out[:, 3 * j : 3 * j + 3] = m
    return MotionClip(fps=clip.fps, frames=out, rep=REP_EXPMAP)


def clip_expmap_to_euler(hierarchy: JointHierarchy, clip: MotionClip) -> MotionClip:
    """Convert an exponential-map clip back to Euler degrees per channel order."""
    if clip.rep != REP_EXPMAP:
        raise InvalidInputError(f"expected exponential-map clip, got {clip.rep!r}")
    out = np.empty_like(clip.frames)
    for j, node_idx in enumerate(hierarchy.joint_indices):
        order = hierarchy.nodes[node_idx].rotation_order
        out[:, 3 * j : 3 * j + 3] = rotations.expmap_to_euler(
            clip.joint(j), order, degrees=True
        )
    return MotionClip(fps=clip.fps, frames=out, rep=REP_EULER)


# ---------------------------------------------------------------------------
# Forward kinematics
# ---------------------------------------------------------------------------


def _local_matrices(hierarchy: JointHierarchy, frames: np.ndarray, rep: str) -> np.ndarray:
    """Per-joint local rotation matrices, shape (T, J, 3, 3)."""
    T = frames.shape[0]
    J = frames.shape[1] // 3
    R = np.empty((T, J, 3, 3), dtype=np.float64)
    for j, node_idx in enumerate(hierarchy.joint_indices):
        triple = frames[:, 3 * j : 3 * j + 3]
        if rep == REP_EULER:
            order = hierarchy.nodes[node_idx].rotation_order
            R[:, j] = rotations.euler_to_matrix(triple, order, degrees=True)
        else:
            R[:, j] = rotations.expmap_to_matrix(triple)
    return R


def clip_positions(hierarchy: JointHierarchy, clip: MotionClip) -> np.ndarray:
    """World-space joint positions for every frame, shape (T, J, 3) in cm.

    The root sits at its offset; every child sits at its parent's position
    plus the parent's world rotation applied to the child's offset.
    """
    if clip.n_joints != hierarchy.n_joints:
        raise InvalidInputError(
            f"clip width {clip.frames.shape[1]} does not match "
            f"{hierarchy.n_joints} joints"
        )
    T = clip.n_frames
    J = hierarchy.n_joints
    local = _local_matrices(hierarchy, clip.frames, clip.rep)
    world = np.empty_like(local)
    pos = np.empty((T, J, 3), dtype=np.float64)

    joint_pos = {idx: j for j, idx in enumerate(hierarchy.joint_indices)}
    for j, node_idx in enumerate(hierarchy.joint_indices):
        node = hierarchy.nodes[node_idx]
        if node.parent is None:
            world[:, j] = local[:, j]
            pos[:, j] = node.offset
        else:
            pj = joint_pos[node.parent]
            world[:, j] = world[:, pj] @ local[:, j]
            pos[:, j] = pos[:, pj] + np.einsum("tab,b->ta", world[:, pj], node.offset)
    return pos


def forward_kinematics(hierarchy: JointHierarchy, pose, rep: str = REP_EULER) -> np.ndarray:
    """World-space joint positions for a single pose, shape (J, 3)."""
    pose = np.asarray(pose, dtype=np.float64)
    if pose.ndim != 1 or pose.shape[0] != 3 * hierarchy.n_joints:
        raise InvalidInputError(
            f"pose width {pose.shape} does not match {hierarchy.n_joints} joints"
        )
    clip = MotionClip(fps=1.0, frames=pose[np.newaxis], rep=rep)
    return clip_positions(hierarchy, clip)[0]
