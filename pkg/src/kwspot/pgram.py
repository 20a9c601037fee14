"""Posteriorgram type, bit-exact binary I/O, alignment, and the synthetic oracle.

The posteriorgram is the sole acoustic interface: a T x V matrix of natural-log
posteriors over a unit set, one row per frame.  The synthetic generator stands
in for the acoustic model so every downstream algorithm can be verified at desk
scale against enumeration oracles.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentInfeasible, BadFormat, InvalidTranscript
from .units import UnitSet

MAGIC = b"BKWS"
VERSION = 1
LOG_ZERO = -1.0e4  # finite floor instead of -inf keeps recursions NaN-free
ROW_NORM_TOL = 1e-3
DEFAULT_FRAME_PERIOD_S = 0.04


@dataclass(frozen=True)
class Posteriorgram:
    utt_id: str
    unit_set_id: str
    frame_period_s: float
    logp: np.ndarray  # float32, shape (T, V)

    def __post_init__(self):
        lp = np.asarray(self.logp, dtype=np.float32)
        if lp.ndim != 2:
            raise BadFormat("logp must be 2-D")
        object.__setattr__(self, "logp", lp)

    @property
    def num_frames(self) -> int:
        return self.logp.shape[0]

    @property
    def num_units(self) -> int:
        return self.logp.shape[1]

    def validate(self) -> None:
        lp = self.logp.astype(np.float64)
        if lp.size and lp.max() > 1e-6:
            raise BadFormat("log posterior above 0")
        if lp.shape[0]:
            norms = np.logaddexp.reduce(lp, axis=1)
            if np.abs(norms).max() > ROW_NORM_TOL:
                raise BadFormat(f"row normalization off by {np.abs(norms).max():g}")


@dataclass(frozen=True)
class SynthConfig:
    frames_per_token: int = 4
    blank_gap: int = 1
    noise: float = 0.0
    confusion: dict[int, list[tuple[int, float]]] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.frames_per_token < 1:
            raise ValueError("frames_per_token must be >= 1")
        if not 0.0 <= self.noise < 1.0:
            raise ValueError("noise must be in [0, 1)")


@dataclass(frozen=True)
class TokenSpan:
    token: int
    start_frame: int
    end_frame: int  # exclusive
    peak_frame: int
    peak_logp: float


def _row(v: int, target: int, noise: float, partners, rng) -> np.ndarray:
    p = np.zeros(v, dtype=np.float64)
    if noise == 0.0:
        p[target] = 1.0
    else:
        p[target] = 1.0 - noise
        if partners:
            ids = np.array([u for u, _ in partners])
            w = np.array([max(w, 0.0) for _, w in partners], dtype=np.float64)
            w = w / w.sum()
            p[ids] += noise * w
        else:
            others = np.ones(v, dtype=np.float64)
            others[target] = 0.0
            p += noise * others / others.sum()
        # per-frame jitter keeps argmax errors stochastic rather than systematic
        jitter = rng.uniform(0.25, 1.75, size=v)
        p *= jitter
        p /= p.sum()
    lp = np.full(v, LOG_ZERO, dtype=np.float64)
    nz = p > 0
    lp[nz] = np.log(p[nz])
    return lp


def synth_generate(transcript: list[int], us: UnitSet, cfg: SynthConfig,
                   utt_id: str = "synth",
                   frame_period_s: float = DEFAULT_FRAME_PERIOD_S) -> Posteriorgram:
    """Layout: blank_gap blanks, frames_per_token frames per token, blank_gap blanks."""
    v = len(us)
    for tok in transcript:
        if tok == us.blank_index or not 0 <= tok < v:
            raise InvalidTranscript(f"token {tok} invalid")
    rng = np.random.default_rng(cfg.seed)
    conf = cfg.confusion or {}
    rows = []
    for _ in range(cfg.blank_gap):
        rows.append(_row(v, us.blank_index, cfg.noise, conf.get(us.blank_index), rng))
    prev = None
    for tok in transcript:
        if tok == prev:
            # repeated tokens need a separating blank to survive CTC collapse
            rows.append(_row(v, us.blank_index, cfg.noise,
                             conf.get(us.blank_index), rng))
        for _ in range(cfg.frames_per_token):
            rows.append(_row(v, tok, cfg.noise, conf.get(tok), rng))
        prev = tok
    for _ in range(cfg.blank_gap):
        rows.append(_row(v, us.blank_index, cfg.noise, conf.get(us.blank_index), rng))
    logp = np.array(rows, dtype=np.float64) if rows else np.zeros((0, v))
    return Posteriorgram(utt_id=utt_id, unit_set_id=us.id,
                         frame_period_s=frame_period_s,
                         logp=logp.astype(np.float32))


def token_layout(transcript: list[int], cfg: SynthConfig) -> list[tuple[int, int]]:
    """Frame spans [start, end) the generator assigns to each transcript token."""
    spans = []
    pos = cfg.blank_gap
    prev = None
    for tok in transcript:
        if tok == prev:
            pos += 1
        spans.append((pos, pos + cfg.frames_per_token))
        pos += cfg.frames_per_token
        prev = tok
    return spans


def greedy_path(pg: Posteriorgram, blank: int = 0) -> tuple[list[int], np.ndarray]:
    """Per-frame argmax plus its CTC collapse (dedupe runs, drop blanks)."""
    if pg.num_frames == 0:
        return [], np.zeros(0, dtype=np.int64)
    frames = np.argmax(pg.logp, axis=1)
    out, prev = [], -1
    for t in frames:
        t = int(t)
        if t != prev and t != blank:
            out.append(t)
        prev = t
    return out, frames


def _expand(tokens: list[int], blank: int) -> list[int]:
    states = [blank]
    for t in tokens:
        states.append(t)
        states.append(blank)
    return states


def ctc_min_frames(tokens: list[int]) -> int:
    rep = sum(1 for a, b in zip(tokens, tokens[1:]) if a == b)
    return len(tokens) + rep


def align_viterbi(pg: Posteriorgram, tokens: list[int],
                  blank: int = 0) -> list[TokenSpan]:
    """Best CTC alignment (max over paths) of tokens against pg.

    Each token's span is the set of frames its non-blank state occupies; the
    peak is the span frame with maximal posterior for that token.
    """
    T = pg.num_frames
    if T < ctc_min_frames(tokens):
        raise AlignmentInfeasible(f"{len(tokens)} tokens need more than {T} frames")
    if not tokens:
        return []
    states = _expand(tokens, blank)
    S = len(states)
    lp = pg.logp.astype(np.float64)
    NEG = -np.inf
    delta = np.full((T, S), NEG)
    back = np.zeros((T, S), dtype=np.int64)
    delta[0, 0] = lp[0, states[0]]
    if S > 1:
        delta[0, 1] = lp[0, states[1]]
        back[0, 1] = 1
    for t in range(1, T):
        for s in range(S):
            best, arg = delta[t - 1, s], s
            if s >= 1 and delta[t - 1, s - 1] > best:
                best, arg = delta[t - 1, s - 1], s - 1
            if (s >= 2 and states[s] != blank and states[s] != states[s - 2]
                    and delta[t - 1, s - 2] > best):
                best, arg = delta[t - 1, s - 2], s - 2
            delta[t, s] = best + lp[t, states[s]]
            back[t, s] = arg
    # best path must end in last blank or last token state
    ends = [S - 1] if S < 2 else [S - 1, S - 2]
    end = max(ends, key=lambda s: delta[T - 1, s])
    if not np.isfinite(delta[T - 1, end]):
        raise AlignmentInfeasible("no feasible path")
    path = np.zeros(T, dtype=np.int64)
    s = end
    for t in range(T - 1, -1, -1):
        path[t] = s
        s = back[t, s]
    spans = []
    for i, tok in enumerate(tokens):
        st = 2 * i + 1
        frames = np.nonzero(path == st)[0]
        start, stop = int(frames[0]), int(frames[-1]) + 1
        peak = start + int(np.argmax(lp[start:stop, tok]))
        spans.append(TokenSpan(token=tok, start_frame=start, end_frame=stop,
                               peak_frame=peak, peak_logp=float(lp[peak, tok])))
    return spans


def viterbi_score(pg: Posteriorgram, tokens: list[int], blank: int = 0) -> float:
    """Log score of the best alignment; used by the enumeration oracle tests."""
    spans = align_viterbi(pg, tokens, blank)
    # recompute by dynamic program end value for exactness
    T = pg.num_frames
    states = _expand(tokens, blank)
    lp = pg.logp.astype(np.float64)
    S = len(states)
    delta = np.full(S, -np.inf)
    delta[0] = lp[0, states[0]]
    if S > 1:
        delta[1] = lp[0, states[1]]
    for t in range(1, T):
        nxt = np.full(S, -np.inf)
        for s in range(S):
            best = delta[s]
            if s >= 1:
                best = max(best, delta[s - 1])
            if s >= 2 and states[s] != blank and states[s] != states[s - 2]:
                best = max(best, delta[s - 2])
            nxt[s] = best + lp[t, states[s]]
        delta = nxt
    del spans
    return float(max(delta[-1], delta[-2] if S > 1 else -np.inf))


# ---------------------------------------------------------------------------
# binary / JSON I/O


def write_pgram(pg: Posteriorgram, path) -> None:
    pg.validate()
    uid = pg.utt_id.encode("utf-8")
    sid = pg.unit_set_id.encode("utf-8")
    T, V = pg.logp.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        fh.write(struct.pack("<H", len(uid)) + uid)
        fh.write(struct.pack("<H", len(sid)) + sid)
        fh.write(struct.pack("<d", pg.frame_period_s))
        fh.write(struct.pack("<II", T, V))
        fh.write(pg.logp.astype("<f4").tobytes(order="C"))


def read_pgram(path) -> Posteriorgram:
    with open(path, "rb") as fh:
        head = fh.read(4)
        if head == MAGIC:
            return _read_binary(fh, path)
    return _read_json(path)


def _read_binary(fh, path) -> Posteriorgram:
    def take(n):
        buf = fh.read(n)
        if len(buf) != n:
            raise BadFormat(f"truncated file: {path}")
        return buf

    (version,) = struct.unpack("<H", take(2))
    if version != VERSION:
        raise BadFormat(f"unsupported version {version}")
    (nu,) = struct.unpack("<H", take(2))
    utt_id = take(nu).decode("utf-8")
    (ns,) = struct.unpack("<H", take(2))
    set_id = take(ns).decode("utf-8")
    (period,) = struct.unpack("<d", take(8))
    T, V = struct.unpack("<II", take(8))
    data = take(T * V * 4)
    logp = np.frombuffer(data, dtype="<f4").reshape(T, V).copy()
    pg = Posteriorgram(utt_id=utt_id, unit_set_id=set_id,
                       frame_period_s=period, logp=logp)
    pg.validate()
    return pg


def _read_json(path) -> Posteriorgram:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        pg = Posteriorgram(utt_id=obj["utt_id"], unit_set_id=obj["unit_set_id"],
                           frame_period_s=float(obj["frame_period_s"]),
                           logp=np.array(obj["logp"], dtype=np.float32).reshape(
                               len(obj["logp"]), -1) if obj["logp"]
                           else np.zeros((0, int(obj["num_units"]))))
    except (OSError, ValueError, KeyError, UnicodeDecodeError) as exc:
        raise BadFormat(f"not a posteriorgram file: {path} ({exc})") from None
    pg.validate()
    return pg


def write_pgram_json(pg: Posteriorgram, path) -> None:
    pg.validate()
    obj = {"utt_id": pg.utt_id, "unit_set_id": pg.unit_set_id,
           "frame_period_s": pg.frame_period_s,
           "num_units": pg.num_units,
           "logp": [[float(x) for x in row] for row in pg.logp]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)
