"""Deterministic embedding corpora with planted quality defects.

Each record belongs to one of a fixed set of topic centroids. A clean record
has frames, covers and text near its centroid; the four defect classes each
perturb one statistic:

* incoherence:   frames drawn from at least three distinct centroids
* text_mismatch: text drawn toward a different centroid than the frames
* visual_defect: a fixed direction added to frames and covers
* text_defect:   a fixed direction added to the text embedding

All randomness for record ``i`` comes from ``(seed, i)``, so records can be
generated in any order (or in parallel) with identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ingest import MAX_FRAMES, QualityGrade, VideoRecord

DEFECTS = ("incoherence", "text_mismatch", "visual_defect", "text_defect")
N_TOPICS = 16
MILD_SEVERITY = 0.5


@dataclass
class SynthConfig:
    n_records: int = 2000
    d_t: int = 64
    d_f: int = 64
    m: int = 8
    defect_probabilities: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    defect_magnitude: float = 1.0
    seed: int = 7
    noise: float = 0.25  # norm-scale of per-embedding isotropic noise
    n_sources: int = 3  # distinct centroids behind an incoherent video

    def __post_init__(self):
        self.defect_probabilities = tuple(float(p) for p in self.defect_probabilities)
        if self.n_records < 1:
            raise ValueError("n_records must be positive")
        if min(self.d_t, self.d_f) < 1:
            raise ValueError("embedding dims must be positive")
        if not 1 <= self.m <= MAX_FRAMES:
            raise ValueError(f"m must lie in 1..{MAX_FRAMES}")
        if len(self.defect_probabilities) != 4:
            raise ValueError("need four defect probabilities")
        if any(not 0 <= p <= 1 for p in self.defect_probabilities):
            raise ValueError("defect probabilities must lie in [0, 1]")
        if self.defect_magnitude <= 0:
            raise ValueError("defect_magnitude must be positive")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        if self.n_sources < 3 or self.n_sources > N_TOPICS:
            raise ValueError(f"n_sources must lie in 3..{N_TOPICS}")


@dataclass
class DefectFlags:
    incoherence: bool = False
    text_mismatch: bool = False
    visual_defect: bool = False
    text_defect: bool = False
    mild: bool = False  # only meaningful when exactly one defect is set

    @property
    def count(self) -> int:
        return sum(getattr(self, name) for name in DEFECTS)

    def as_tuple(self) -> tuple[bool, bool, bool, bool]:
        return tuple(getattr(self, name) for name in DEFECTS)


def assign_grade(flags: DefectFlags) -> QualityGrade:
    n = flags.count
    if n == 0:
        return QualityGrade.EXCELLENT
    if n == 1:
        return QualityGrade.GOOD if flags.mild else QualityGrade.FAIR
    return QualityGrade.BAD


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


@dataclass
class SynthWorld:
    """Seed-level structure shared by every record of one corpus."""

    frame_centroids: np.ndarray  # (N_TOPICS, d_f)
    text_map: np.ndarray  # (d_t, d_f) carries frame space into text space
    visual_direction: np.ndarray  # (d_f,) unit
    text_direction: np.ndarray  # (d_t,) unit

    @classmethod
    def build(cls, config: SynthConfig) -> "SynthWorld":
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
        centroids = _unit(rng.standard_normal((N_TOPICS, config.d_f)))
        if config.d_t == config.d_f:
            text_map = np.eye(config.d_t)
        else:
            text_map = rng.standard_normal((config.d_t, config.d_f)) / np.sqrt(config.d_f)
        visual = _unit(rng.standard_normal(config.d_f))
        text = _unit(rng.standard_normal(config.d_t))
        return cls(centroids, text_map, visual, text)

    def text_centroid(self, frame_space_vec: np.ndarray) -> np.ndarray:
        return _unit(self.text_map @ frame_space_vec)


@dataclass
class SynthCorpus:
    records: list[VideoRecord]
    flags: list[DefectFlags]
    world: SynthWorld = field(repr=False)


def _blend(own: np.ndarray, other: np.ndarray, severity: float) -> np.ndarray:
    return _unit((1 - severity) * own + severity * other)


def generate_record(index: int, config: SynthConfig, world: SynthWorld) -> tuple[VideoRecord, DefectFlags]:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1, index]))
    # fixed draw order keeps records reproducible whatever the flags turn out to be
    topic = int(rng.integers(N_TOPICS))
    hits = rng.random(4) < np.asarray(config.defect_probabilities)
    mild_coin = rng.random() < 0.5
    others = rng.permutation(np.delete(np.arange(N_TOPICS), topic))
    frame_noise = rng.standard_normal((config.m, config.d_f))
    cover_noise = rng.standard_normal((2, config.d_f))
    text_noise = rng.standard_normal(config.d_t)
    source_order = rng.permutation(config.m)

    flags = DefectFlags(*map(bool, hits))
    flags.mild = flags.count == 1 and bool(mild_coin)
    severity = MILD_SEVERITY if flags.mild else 1.0
    own = world.frame_centroids[topic]

    frame_means = np.tile(own, (config.m, 1))
    text_topic = own
    if flags.incoherence:
        sources = [own] + [
            _blend(own, world.frame_centroids[k], severity) for k in others[: config.n_sources - 1]
        ]
        # every source gets at least one frame (when m allows)
        for slot, j in enumerate(source_order):
            frame_means[j] = sources[slot % len(sources)]
        # the text describes the spliced material as a whole, so incoherence
        # alone leaves the frame-text agreement intact
        text_topic = _unit(frame_means.mean(axis=0))
    if flags.text_mismatch:
        text_topic = _blend(text_topic, world.frame_centroids[others[-1]], severity)

    frames = frame_means + config.noise * frame_noise / np.sqrt(config.d_f)
    covers = own + config.noise * cover_noise / np.sqrt(config.d_f)
    text = world.text_centroid(text_topic) + config.noise * text_noise / np.sqrt(config.d_t)
    if flags.visual_defect:
        shift = severity * config.defect_magnitude * world.visual_direction
        frames = frames + shift
        covers = covers + shift
    if flags.text_defect:
        text = text + severity * config.defect_magnitude * world.text_direction

    record = VideoRecord(
        id=f"synth-{config.seed}-{index:06d}",
        text_embedding=text,
        frame_embeddings=frames,
        cover_embeddings=covers,
        grade=assign_grade(flags),
    )
    return record, flags


def generate_corpus(config: SynthConfig, start: int = 0) -> SynthCorpus:
    """Generate ``config.n_records`` records with indices ``start, start+1, ...``."""
    world = SynthWorld.build(config)
    records, flags = [], []
    for i in range(start, start + config.n_records):
        r, f = generate_record(i, config, world)
        records.append(r)
        flags.append(f)
    return SynthCorpus(records, flags, world)


# ------------------------------------------------------------ defect statistics


def frame_dispersion(record: VideoRecord) -> float:
    """Mean pairwise cosine distance between frames (0 for a single frame)."""
    f = _unit(record.frame_embeddings.astype(np.float64))
    m = f.shape[0]
    if m < 2:
        return 0.0
    sims = f @ f.T
    iu = np.triu_indices(m, k=1)
    return float(np.mean(1.0 - sims[iu]))


def frame_text_cosine(record: VideoRecord, world: SynthWorld) -> float:
    """Cosine between the text embedding and the mean frame carried into text space."""
    mean_frame = record.frame_embeddings.astype(np.float64).mean(axis=0)
    mapped = world.text_map @ mean_frame
    t = record.text_embedding.astype(np.float64)
    return float(mapped @ t / (np.linalg.norm(mapped) * np.linalg.norm(t)))


def visual_projection(record: VideoRecord, world: SynthWorld) -> float:
    return float(record.frame_embeddings.astype(np.float64).mean(axis=0) @ world.visual_direction)


def text_projection(record: VideoRecord, world: SynthWorld) -> float:
    return float(record.text_embedding.astype(np.float64) @ world.text_direction)


def defect_statistics(record: VideoRecord, world: SynthWorld) -> np.ndarray:
    """The four per-defect statistics, ordered like ``DEFECTS``."""
    return np.array(
        [
            frame_dispersion(record),
            frame_text_cosine(record, world),
            visual_projection(record, world),
            text_projection(record, world),
        ]
    )
