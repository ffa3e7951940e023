"""Seeded synthetic CSI session generator.

Signal model per packet time t and subcarrier f (index normalized to
f/256)::

    csi(t, f) = static_gain(f) * (1 + motion_amp * sum_k a_k *
                sin(2*pi*(motion_rate * d_k * t + s_k * f) + phi_k))
                + CN(0, noise_std^2)

``static_gain`` is an environment's multipath frequency response (a few
complex delay taps), so its FFT concentrates on environment-specific bins;
activities add time-oscillating sidebands around those taps. Each activity
class k-component carries a temporal rate ``d_k`` (Hz), a depth ``a_k``
and a subcarrier slope ``s_k`` (cycles across the band). Person profiles
scale depth and rate. Values are quantized to the capture container's i16
fixed point, so regenerating with one seed is byte-identical.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .annotations import Annotation
from .capture import CaptureHeader, CsiFrame, N_SUBCARRIERS, write_capture
from .errors import EmptyScriptError, GridTooSmallError, UnknownClassError

IQ_SCALE = 1000.0
CAMERA_FPS = 10
CAMERA_PERIOD_US = 1_000_000 // CAMERA_FPS


@dataclass(frozen=True)
class EnvProfile:
    """Environment as a static 256-bin complex frequency response."""

    env_id: int
    static_gain: np.ndarray
    noise_std: float = 0.05

    def __post_init__(self):
        g = np.asarray(self.static_gain, dtype=np.complex128)
        if g.shape != (N_SUBCARRIERS,):
            raise ValueError(f"static_gain must have {N_SUBCARRIERS} bins, got {g.shape}")
        mags = np.abs(g)
        if mags.min() <= 0.0 or mags.max() > 10.0:
            raise ValueError("|static_gain| must lie in (0, 10]")
        if self.noise_std < 0.0:
            raise ValueError("noise_std must be >= 0")
        object.__setattr__(self, "static_gain", g)


@dataclass(frozen=True)
class PersonProfile:
    person_id: int
    motion_amp: float = 1.0
    motion_rate: float = 1.0

    def __post_init__(self):
        if self.motion_amp <= 0.0 or self.motion_rate <= 0.0:
            raise ValueError("motion_amp and motion_rate must be > 0")


@dataclass(frozen=True)
class ActivityTemplate:
    """Sinusoidal modulators for one activity class.

    ``components`` entries are (doppler_freq_hz, amplitude,
    subcarrier_slope). Only the idle class may have none.
    """

    name: str
    components: tuple[tuple[float, float, float], ...]
    duration_range: tuple[float, float] = (2.0, 6.0)

    def __post_init__(self):
        if not self.components and self.name != "empty":
            raise ValueError(f"class {self.name!r} needs at least one component")


# Ten default classes. arm-exercise and clapping share component frequencies
# and slopes, differing only in depth, to make them genuinely confusable;
# sitting-down and standing-up are near neighbors for the same reason.
DEFAULT_TEMPLATES: tuple[ActivityTemplate, ...] = (
    ActivityTemplate("empty", ()),
    ActivityTemplate("walking", ((1.1, 0.55, 2.0), (2.2, 0.25, 5.0), (0.4, 0.20, 1.0))),
    ActivityTemplate("drinking", ((0.5, 0.10, 1.5),)),
    ActivityTemplate("arm-exercise", ((3.6, 0.26, 3.0), (1.8, 0.10, 6.0))),
    ActivityTemplate("clapping", ((3.6, 0.44, 3.0), (1.8, 0.16, 6.0))),
    ActivityTemplate("jogging", ((2.6, 0.65, 4.0), (5.2, 0.30, 8.0))),
    ActivityTemplate("squat", ((0.75, 0.50, 2.5), (1.5, 0.18, 5.0))),
    ActivityTemplate("falling", ((3.1, 0.80, 7.0), (0.9, 0.35, 2.0))),
    ActivityTemplate("sitting-down", ((0.85, 0.32, 2.2), (1.7, 0.12, 4.5))),
    ActivityTemplate("standing-up", ((0.95, 0.34, 2.6), (1.9, 0.13, 5.2))),
)
DEFAULT_CLASS_NAMES: tuple[str, ...] = tuple(t.name for t in DEFAULT_TEMPLATES)


def random_env_profile(env_id: int, seed, noise_std: float = 0.05) -> EnvProfile:
    """Draw a multipath response: 3 to 6 delay taps at random positions."""
    rng = np.random.default_rng(seed)
    n_paths = int(rng.integers(3, 7))
    delays = rng.uniform(1.0, 60.0, size=n_paths)
    amps = rng.uniform(0.4, 1.2, size=n_paths) * np.exp(
        1j * rng.uniform(0.0, 2 * np.pi, size=n_paths)
    )
    f = np.arange(N_SUBCARRIERS) / N_SUBCARRIERS
    gain = (amps[:, None] * np.exp(2j * np.pi * delays[:, None] * f[None, :])).sum(axis=0)
    mags = np.abs(gain)
    # keep the response away from nulls and inside the quantizable range
    floor = 0.15
    low = mags < floor
    gain[low] *= floor / np.maximum(mags[low], 1e-12)
    gain = np.clip(np.abs(gain), None, 8.0) * np.exp(1j * np.angle(gain))
    return EnvProfile(env_id, gain, noise_std)


def person_profile(person_id: int) -> PersonProfile:
    """Deterministic mild ladder of movement styles."""
    return PersonProfile(
        person_id,
        motion_amp=1.0 + 0.18 * person_id,
        motion_rate=1.0 / (1.0 + 0.08 * person_id),
    )


@dataclass
class Session:
    """One generated recording: capture frames plus ground-truth files."""

    header: CaptureHeader
    frames: list[CsiFrame]
    annotations: list[Annotation]
    camera_ts_us: list[int]
    env_id: int
    person_id: int
    session_id: int


def generate_session(
    env: EnvProfile,
    person: PersonProfile,
    activity_script: Sequence[tuple[str, float]],
    rate_pps: int = 200,
    n_ant: int = 1,
    seed: int | np.random.SeedSequence = 0,
    templates: Sequence[ActivityTemplate] = DEFAULT_TEMPLATES,
    session_id: int = 0,
) -> Session:
    """Generate one session following ``activity_script``.

    The script is a list of (class_name, duration_seconds) spans. Output is
    deterministic in ``seed``: one motion stream draws the per-span
    component phases (shared across antennas), and per-antenna child
    streams draw the receiver noise.
    """
    if rate_pps <= 0:
        raise ValueError("rate_pps must be > 0")
    if not activity_script:
        raise EmptyScriptError("activity script has no spans")
    by_name = {t.name: t for t in templates}
    for name, _dur in activity_script:
        if name not in by_name:
            raise UnknownClassError(f"no activity template named {name!r}")

    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    motion_ss, *ant_ss = ss.spawn(1 + n_ant)
    motion_rng = np.random.default_rng(motion_ss)

    # span boundaries in packets
    edges_s = np.cumsum([0.0] + [float(d) for _n, d in activity_script])
    pkt_edges = np.rint(edges_s * rate_pps).astype(np.int64)
    n_packets = int(pkt_edges[-1])

    t = np.arange(n_packets, dtype=np.float64) / rate_pps
    f = np.arange(N_SUBCARRIERS, dtype=np.float64) / N_SUBCARRIERS
    modulation = np.zeros((n_packets, N_SUBCARRIERS))
    for (name, _dur), p0, p1 in zip(activity_script, pkt_edges[:-1], pkt_edges[1:]):
        tpl = by_name[name]
        phases = motion_rng.uniform(0.0, 2 * np.pi, size=len(tpl.components))
        if p1 <= p0:
            continue
        ts = t[p0:p1, None]
        for (d_k, a_k, s_k), phi in zip(tpl.components, phases):
            modulation[p0:p1] += a_k * np.sin(
                2 * np.pi * (person.motion_rate * d_k * ts + s_k * f[None, :]) + phi
            )

    clean = env.static_gain[None, :] * (1.0 + person.motion_amp * modulation)

    frames: list[CsiFrame] = []
    period_us = 1_000_000.0 / rate_pps
    ts_us = np.rint(np.arange(n_packets) * period_us).astype(np.int64)
    per_ant: list[np.ndarray] = []
    for a in range(n_ant):
        ant_rng = np.random.default_rng(ant_ss[a])
        # antennas sit at offset positions: deterministic phase ramp
        ramp = np.exp(2j * np.pi * 0.7 * a * f)
        noise = env.noise_std * (
            ant_rng.standard_normal((n_packets, N_SUBCARRIERS))
            + 1j * ant_rng.standard_normal((n_packets, N_SUBCARRIERS))
        )
        vals = (clean * ramp[None, :] + noise) * IQ_SCALE
        iq = np.empty((n_packets, 2 * N_SUBCARRIERS))
        iq[:, 0::2] = vals.real
        iq[:, 1::2] = vals.imag
        per_ant.append(np.clip(np.rint(iq), -32768, 32767))

    for p in range(n_packets):
        for a in range(n_ant):
            row = per_ant[a][p]
            frames.append(CsiFrame(int(ts_us[p]), p & 0xFFFF, a, row[0::2] + 1j * row[1::2]))

    total_us = int(np.rint(edges_s[-1] * 1_000_000))
    n_cam = max(1, total_us // CAMERA_PERIOD_US)
    camera_ts = [j * CAMERA_PERIOD_US for j in range(n_cam)]

    annotations = []
    for (name, _dur), e0, e1 in zip(activity_script, (edges_s * 1e6)[:-1], (edges_s * 1e6)[1:]):
        start_frame = int(-(-int(np.rint(e0)) // CAMERA_PERIOD_US))
        end_frame = int(-(-int(np.rint(e1)) // CAMERA_PERIOD_US)) - 1
        end_frame = min(end_frame, n_cam - 1)
        if end_frame < start_frame:
            continue
        annotations.append(Annotation(
            label=name,
            start_frame=start_frame,
            end_frame=end_frame,
            env_id=env.env_id,
            person_id=person.person_id,
            session_id=session_id,
        ))

    header = CaptureHeader(1, n_ant, rate_pps, len(frames))
    return Session(header, frames, annotations, camera_ts, env.env_id, person.person_id, session_id)


# -- benchmark grid -----------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkSpec:
    """Grid of environments x persons x sessions for shift experiments."""

    n_envs: int = 3
    n_persons: int = 2
    sessions_per_pair: int = 1
    span_seconds: float = 4.0
    script_repeats: int = 2
    rate_pps: int = 200
    n_ant: int = 1
    noise_std: float = 0.05
    held_out_env: int | None = None
    held_out_person: int | None = None
    time_train_fraction: float = 0.5
    classes: tuple[str, ...] = DEFAULT_CLASS_NAMES

    @staticmethod
    def from_dict(cfg: dict) -> "BenchmarkSpec":
        known = {f.name for f in BenchmarkSpec.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(cfg) - known
        if unknown:
            raise ValueError(f"unknown benchmark keys: {sorted(unknown)}")
        if "classes" in cfg:
            cfg = dict(cfg, classes=tuple(cfg["classes"]))
        return BenchmarkSpec(**cfg)


@dataclass
class Benchmark:
    sessions: list[Session]
    manifest: dict
    env_profiles: list[EnvProfile]
    person_profiles: list[PersonProfile]


def make_benchmark(spec: BenchmarkSpec, seed: int = 0) -> Benchmark:
    """Generate the full session grid plus the three partition manifests.

    Partitions: hold one environment out entirely; hold one person out
    (their environments stay seen through the other person); split each
    session's timeline at ``time_train_fraction``.
    """
    if spec.n_envs < 2 or spec.n_persons < 2:
        raise GridTooSmallError(
            f"grid needs >= 2 envs and >= 2 persons, got {spec.n_envs} x {spec.n_persons}"
        )
    templates = [t for t in DEFAULT_TEMPLATES if t.name in set(spec.classes)]
    if len(templates) != len(spec.classes):
        missing = set(spec.classes) - {t.name for t in DEFAULT_TEMPLATES}
        raise UnknownClassError(f"no templates for classes {sorted(missing)}")

    root = np.random.SeedSequence(seed)
    env_seeds = root.spawn(spec.n_envs)
    envs = [
        random_env_profile(e, env_seeds[e], spec.noise_std) for e in range(spec.n_envs)
    ]
    persons = [person_profile(p) for p in range(spec.n_persons)]

    n_sessions = spec.n_envs * spec.n_persons * spec.sessions_per_pair
    session_seeds = root.spawn(n_sessions)
    script_rng = np.random.default_rng(root.spawn(1)[0])

    sessions = []
    sid = 0
    for e in range(spec.n_envs):
        for p in range(spec.n_persons):
            for _s in range(spec.sessions_per_pair):
                order = []
                for _r in range(spec.script_repeats):
                    perm = script_rng.permutation(len(spec.classes))
                    order.extend(spec.classes[i] for i in perm)
                script = [(name, spec.span_seconds) for name in order]
                sessions.append(generate_session(
                    envs[e], persons[p], script,
                    rate_pps=spec.rate_pps, n_ant=spec.n_ant,
                    seed=session_seeds[sid], templates=DEFAULT_TEMPLATES,
                    session_id=sid,
                ))
                sid += 1

    held_env = spec.held_out_env if spec.held_out_env is not None else spec.n_envs - 1
    held_person = (
        spec.held_out_person if spec.held_out_person is not None else spec.n_persons - 1
    )
    manifest = {
        "seed": seed,
        "grid": {
            "n_envs": spec.n_envs,
            "n_persons": spec.n_persons,
            "sessions_per_pair": spec.sessions_per_pair,
        },
        "classes": list(spec.classes),
        "sessions": [
            {
                "session_id": s.session_id,
                "env_id": s.env_id,
                "person_id": s.person_id,
                "n_frames": len(s.frames),
            }
            for s in sessions
        ],
        "partitions": {
            "by_environment": {"held_out_envs": [held_env]},
            "by_person": {"held_out_persons": [held_person]},
            "by_time": {"train_fraction": spec.time_train_fraction},
        },
    }
    return Benchmark(sessions, manifest, envs, persons)


def save_benchmark(bench: Benchmark, out_dir: str | Path) -> dict:
    """Write captures, annotation JSONL, camera timestamps and the manifest.

    Returns the manifest extended with relative file paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = dict(bench.manifest)
    entries = []
    for s, entry in zip(bench.sessions, manifest["sessions"]):
        stem = f"session_{s.session_id:03d}"
        write_capture(out / f"{stem}.csi", s.frames, s.header.n_ant, s.header.sample_rate_pps)
        from .annotations import write_annotations, write_camera_timestamps

        write_annotations(out / f"{stem}.jsonl", s.annotations)
        write_camera_timestamps(out / f"{stem}.camera.json", s.camera_ts_us)
        entries.append(dict(entry, capture=f"{stem}.csi", annotations=f"{stem}.jsonl",
                            camera_ts=f"{stem}.camera.json"))
    manifest["sessions"] = entries
    with open(out / "benchmark.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
