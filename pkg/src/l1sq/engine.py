"""Two-stage nearest-subspace search in the l1 metric.

The engine answers "which database subspace is l1-closest to this query?"
without solving a full-size regression per database member.  At build time a
pool of k independent d x D Cauchy matrices is drawn and every subspace
basis is pushed through every pool member, producing k small snapshots of
the database.  At query time:

  stage 1  For N_rep pool members (chosen without replacement from the
           pool), project the query and measure its l1 distance to all n
           projected subspaces — n * N_rep small (d-row) solves.  Each
           repetition casts one vote for its nearest label.
  stage 2  The strongest candidates are re-measured exactly in the ambient
           space — at most N_back full (D-row) solves — and the best refined
           distance wins.

Cauchy projections preserve relative l1 distances well enough (dilation
concentrates, contraction is exponentially unlikely) that the true nearest
subspace is almost always among the top few vote-getters, so stage 2
recovers the exhaustive answer at a fraction of its cost.

Determinism: pool member j is regenerable bit-exactly from
(master_seed, j) via derive_seed, queries draw their repetition choices
from the seed recorded in the result, and ties anywhere break toward the
smallest label, so equal inputs give equal outputs.

Index files use the L1IX1 container; see save_index for the byte layout.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cauchy import derive_seed, generator, sample_cauchy_matrix, validate_seed
from .errors import (
    ChecksumMismatch,
    ConfigInvalid,
    DimensionMismatch,
    EmptyDatabase,
    FormatError,
    ShapeMismatch,
    TooFewSubspaces,
)
from .linalg import Subspace, as_vector
from .matio import DMAT_MAGIC, crc64, pack_dmat, unpack_dmat
from .regression import DEFAULT_CONFIG, SolverConfig, solve_l1_many

INDEX_MAGIC = b"L1IX1\x00"
INDEX_VERSION = 1

#: Relative tolerance deciding which labels tie for an argmin distance set.
ARGMIN_REL_TOL = 1e-9


@dataclass(frozen=True)
class ProjectionPool:
    """k iid Cauchy sketching matrices, each d x ambient_dim.

    Matrix j is sample_cauchy_matrix(d, ambient_dim, derive_seed(master_seed,
    j)), so the pool is a pure function of its header fields and never needs
    to be stored.
    """

    k: int
    d: int
    ambient_dim: int
    master_seed: int
    matrices: list[np.ndarray] = field(repr=False)

    def member_seed(self, j: int) -> int:
        """Seed that regenerates matrices[j] bit-exactly."""
        if not 0 <= j < self.k:
            raise ConfigInvalid(f"pool has {self.k} members, no index {j}")
        return derive_seed(self.master_seed, j)


def build_pool(k: int, d: int, ambient_dim: int, master_seed, threads: int = 1) -> ProjectionPool:
    """Draw the k sketching matrices for (master_seed, 0..k-1)."""
    if k < 1:
        raise ConfigInvalid(f"pool size must be positive, got k={k}")
    if not 1 <= d <= ambient_dim:
        raise ConfigInvalid(
            f"sketch dimension must satisfy 1 <= d <= D, got d={d}, D={ambient_dim}"
        )
    master_seed = validate_seed(master_seed)

    def member(j: int) -> np.ndarray:
        return sample_cauchy_matrix(d, ambient_dim, derive_seed(master_seed, j))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            matrices = list(pool.map(member, range(k)))
    else:
        matrices = [member(j) for j in range(k)]
    return ProjectionPool(
        k=k, d=d, ambient_dim=ambient_dim, master_seed=master_seed, matrices=matrices
    )


@dataclass
class SearchIndex:
    """A database of subspaces plus their pool projections.

    ``projected[j]`` stacks the n sketched bases for pool member j as one
    (n, d, r) array; projected[j][i] equals pool.matrices[j] @
    subspaces[i].basis (the build computes exactly that product, and loads
    must reproduce it to 1e-10).  ``bases`` stacks the ambient bases
    (n, D, r) for batched exact solves.
    """

    pool: ProjectionPool
    subspaces: list[Subspace]
    labels: list[str]
    projected: list[np.ndarray] = field(repr=False)
    bases: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.subspaces)

    @property
    def ambient_dim(self) -> int:
        return self.pool.ambient_dim

    @property
    def rank(self) -> int:
        return self.subspaces[0].rank


def _checked_database(subspaces, labels) -> tuple[list[Subspace], list[str]]:
    subspaces = list(subspaces)
    if not subspaces:
        raise EmptyDatabase("database holds no subspaces")
    big_d = subspaces[0].ambient_dim
    r = subspaces[0].rank
    for i, s in enumerate(subspaces):
        if s.ambient_dim != big_d or s.rank != r:
            raise DimensionMismatch(
                f"subspace {i} is {s.ambient_dim}/{s.rank} but the database "
                f"is {big_d}/{r} (ambient/rank)"
            )
    if labels is None:
        labels = default_labels(len(subspaces))
    labels = [str(l) for l in labels]
    if len(labels) != len(subspaces):
        raise ConfigInvalid(
            f"{len(labels)} labels for {len(subspaces)} subspaces"
        )
    if len(set(labels)) != len(labels):
        raise ConfigInvalid("labels must be unique")
    if any(not l for l in labels):
        raise ConfigInvalid("labels must be non-empty strings")
    return subspaces, labels


def default_labels(n: int) -> list[str]:
    """S000, S001, ... zero-padded so lexicographic order is numeric order."""
    width = max(3, len(str(max(n - 1, 0))))
    return [f"S{i:0{width}d}" for i in range(n)]


def build_index(
    subspaces,
    labels=None,
    *,
    k: int,
    d: int,
    master_seed,
    threads: int = 1,
) -> SearchIndex:
    """Project every subspace through every pool member.

    Raises EmptyDatabase / DimensionMismatch for a bad database and
    ConfigInvalid for bad pool parameters (including d below the subspace
    rank, which would make every sketched distance identically zero).
    """
    subspaces, labels = _checked_database(subspaces, labels)
    r = subspaces[0].rank
    if d < r:
        raise ConfigInvalid(
            f"sketch dimension d={d} is below the subspace rank {r}; "
            "projected bases would be singular"
        )
    pool = build_pool(k, d, subspaces[0].ambient_dim, master_seed, threads=threads)
    bases = np.stack([s.basis for s in subspaces])  # (n, D, r)

    def project(j: int) -> np.ndarray:
        # (1, d, D) @ (n, D, r) -> (n, d, r)
        return np.matmul(pool.matrices[j][None, :, :], bases)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as tp:
            projected = list(tp.map(project, range(pool.k)))
    else:
        projected = [project(j) for j in range(pool.k)]
    return SearchIndex(
        pool=pool, subspaces=subspaces, labels=labels, projected=projected, bases=bases
    )


@dataclass(frozen=True)
class QueryConfig:
    """Two-stage search knobs.

    n_rep pool members vote in stage 1 (must not exceed pool.k at query
    time); n_back candidates are re-measured exactly in stage 2.  rng_seed
    drives the repetition choice and is echoed in the result.
    """

    n_rep: int = 5
    n_back: int = 5
    rng_seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.n_rep < 1:
            raise ConfigInvalid(f"n_rep must be >= 1, got {self.n_rep}")
        if self.n_back < 1:
            raise ConfigInvalid(f"n_back must be >= 1, got {self.n_back}")
        validate_seed(self.rng_seed)


@dataclass(frozen=True)
class QueryResult:
    """Outcome of a two-stage query.

    ranked_candidates lists the stage-2 scan set in scan order as
    (label, votes, best_projected_distance) — best over all repetitions.
    refined_distances holds the exact ambient distances computed in stage 2;
    winner is their argmin (ties to the smallest label).  stage1_solves and
    stage2_solves count LP instances solved, for cost audits.
    """

    winner: str
    ranked_candidates: list[tuple[str, int, float]]
    refined_distances: dict[str, float]
    repetitions_used: int
    seed_used: int
    stage1_solves: int
    stage2_solves: int


def query(index: SearchIndex, q, config: QueryConfig | None = None) -> QueryResult:
    """Two-stage nearest-subspace search for query point q.

    Stage 1 draws config.n_rep distinct pool members, sketches q through
    each, and solves the n small regressions per member; each repetition
    votes for its nearest label (distance ties inside a repetition go to the
    smallest label).  Candidates are ranked by (votes desc, best projected
    distance asc, label asc).  If fewer than n_back labels got votes, the
    remaining slots fill with non-candidates in ascending order of the LAST
    repetition's projected distance.  Stage 2 measures the scan set exactly
    and returns the closest (ties to the smallest label).
    """
    cfg = config or QueryConfig()
    q = as_vector(q, "query")
    if q.shape[0] != index.ambient_dim:
        raise ShapeMismatch(
            f"query has length {q.shape[0]} but the index is over "
            f"R^{index.ambient_dim}"
        )
    if cfg.n_rep > index.pool.k:
        raise ConfigInvalid(
            f"n_rep={cfg.n_rep} exceeds the pool size k={index.pool.k}"
        )
    if cfg.n_back > index.n:
        raise ConfigInvalid(
            f"n_back={cfg.n_back} exceeds the database size n={index.n}"
        )

    labels = index.labels
    pos = {lab: i for i, lab in enumerate(labels)}
    n = index.n
    rng = generator(cfg.rng_seed)
    chosen = rng.permutation(index.pool.k)[: cfg.n_rep]

    # One batched solve covers every (repetition, subspace) pair: designs
    # stacked repetition-major, each repetition pairing with its own
    # sketched target.
    designs = np.concatenate([index.projected[j] for j in chosen])
    sketched = np.stack([index.pool.matrices[j] @ q for j in chosen])
    targets = np.repeat(sketched, n, axis=0)
    sols = solve_l1_many(designs, targets, cfg.solver)
    all_dists = np.array([s.objective for s in sols]).reshape(cfg.n_rep, n)

    votes: dict[str, int] = {}
    best_proj = all_dists.min(axis=0)
    last_dists = all_dists[-1]
    for dists in all_dists:
        tie = np.flatnonzero(dists == dists.min())
        vote_label = min(labels[i] for i in tie)
        votes[vote_label] = votes.get(vote_label, 0) + 1

    candidates = sorted(
        votes,
        key=lambda lab: (-votes[lab], best_proj[pos[lab]], lab),
    )
    if len(candidates) < cfg.n_back:
        chosen_set = set(candidates)
        fill = sorted(
            (i for i in range(n) if labels[i] not in chosen_set),
            key=lambda i: (last_dists[i], labels[i]),
        )
        candidates.extend(labels[i] for i in fill[: cfg.n_back - len(candidates)])
    scan = candidates[: cfg.n_back]

    scan_idx = [pos[lab] for lab in scan]
    refined_sols = solve_l1_many(index.bases[scan_idx], q, cfg.solver)
    refined = {lab: s.objective for lab, s in zip(scan, refined_sols)}
    winner = min(scan, key=lambda lab: (refined[lab], lab))

    return QueryResult(
        winner=winner,
        ranked_candidates=[
            (lab, votes.get(lab, 0), float(best_proj[pos[lab]])) for lab in scan
        ],
        refined_distances=refined,
        repetitions_used=cfg.n_rep,
        seed_used=cfg.rng_seed,
        stage1_solves=n * cfg.n_rep,
        stage2_solves=len(scan),
    )


@dataclass(frozen=True)
class ExhaustiveResult:
    winner: str
    distances: dict[str, float]


def exhaustive_search(
    subspaces, labels, q, config: SolverConfig | None = None
) -> ExhaustiveResult:
    """Exact l1 distance to every subspace; winner ties to smallest label."""
    subspaces, labels = _checked_database(subspaces, labels)
    q = as_vector(q, "query")
    if q.shape[0] != subspaces[0].ambient_dim:
        raise ShapeMismatch(
            f"query has length {q.shape[0]} but subspaces live in "
            f"R^{subspaces[0].ambient_dim}"
        )
    bases = np.stack([s.basis for s in subspaces])
    sols = solve_l1_many(bases, q, config or DEFAULT_CONFIG)
    distances = {lab: s.objective for lab, s in zip(labels, sols)}
    winner = min(labels, key=lambda lab: (distances[lab], lab))
    return ExhaustiveResult(winner=winner, distances=distances)


def argmin_labels(distances: dict[str, float], rel_tol: float = ARGMIN_REL_TOL) -> set[str]:
    """Labels whose distance ties the minimum within a relative tolerance."""
    if not distances:
        raise EmptyDatabase("no distances to take an argmin over")
    dmin = min(distances.values())
    cut = dmin + rel_tol * max(1.0, dmin)
    return {lab for lab, dist in distances.items() if dist <= cut}


@dataclass(frozen=True)
class GapReport:
    """Nearest/second-nearest distance diagnostics.

    eta = second/nearest measures how identifiable the nearest subspace is;
    it is float('inf') when the nearest distance is exactly zero and the
    second is not, and 1.0 when both are zero.
    """

    eta: float
    nearest: str
    second: str
    nearest_distance: float
    second_distance: float


def distance_gap(distances: dict[str, float]) -> GapReport:
    """Gap statistics over a distance map; needs at least two labels."""
    if len(distances) < 2:
        raise TooFewSubspaces(
            f"distance gap needs >= 2 subspaces, got {len(distances)}"
        )
    order = sorted(distances, key=lambda lab: (distances[lab], lab))
    d1 = float(distances[order[0]])
    d2 = float(distances[order[1]])
    if d1 == 0.0:
        eta = 1.0 if d2 == 0.0 else float("inf")
    else:
        eta = d2 / d1
    return GapReport(
        eta=eta,
        nearest=order[0],
        second=order[1],
        nearest_distance=d1,
        second_distance=d2,
    )


# ---------------------------------------------------------------------------
# L1IX1 index files.
#
#   bytes 0..5   magic b"L1IX1\0"
#   byte  6      format version (1)
#   6 x u64 LE   k, d, D, n, r, master_seed
#   n  x         label: u64 LE byte length + that many UTF-8 bytes
#   n  x         ambient basis, DMAT1 block (D x r)
#   k*n x        projected basis, DMAT1 block (d x r), pool-major
#                (j = 0: all n subspaces, then j = 1, ...)
#   8 bytes      CRC-64/XZ of everything above, u64 LE
#
# Pool matrices are not stored; load_index regenerates them from
# master_seed, which the regeneration invariant guarantees is lossless.

_U64 = struct.Struct("<Q")


def save_index(index: SearchIndex, path) -> int:
    """Write the index to ``path`` in L1IX1 format; returns bytes written."""
    parts = [INDEX_MAGIC, bytes([INDEX_VERSION])]
    pool = index.pool
    for value in (pool.k, pool.d, pool.ambient_dim, index.n, index.rank,
                  pool.master_seed):
        parts.append(_U64.pack(value))
    for lab in index.labels:
        raw = lab.encode("utf-8")
        parts.append(_U64.pack(len(raw)))
        parts.append(raw)
    for s in index.subspaces:
        parts.append(pack_dmat(s.basis))
    for j in range(pool.k):
        stack = index.projected[j]
        for i in range(index.n):
            parts.append(pack_dmat(stack[i]))
    payload = b"".join(parts)
    blob = payload + _U64.pack(crc64(payload))
    Path(path).write_bytes(blob)
    return len(blob)


def load_index(path) -> SearchIndex:
    """Read an L1IX1 file and rebuild the index, pool included.

    Raises FormatError on structural damage, ChecksumMismatch when the
    trailing CRC disagrees with the content.
    """
    blob = Path(path).read_bytes()
    if len(blob) < len(INDEX_MAGIC) + 1 + 6 * 8 + 8:
        raise FormatError("index file too short for an L1IX1 header")
    if blob[: len(INDEX_MAGIC)] != INDEX_MAGIC:
        raise FormatError("bad index magic; not an L1IX1 file")
    version = blob[len(INDEX_MAGIC)]
    if version != INDEX_VERSION:
        raise FormatError(f"unsupported index version {version}")

    payload, stored = blob[:-8], _U64.unpack(blob[-8:])[0]
    actual = crc64(payload)
    if actual != stored:
        raise ChecksumMismatch(
            f"index checksum mismatch: stored {stored:#018x}, "
            f"recomputed {actual:#018x}"
        )

    off = len(INDEX_MAGIC) + 1
    header = []
    for _ in range(6):
        header.append(_U64.unpack_from(payload, off)[0])
        off += 8
    k, d, big_d, n, r, master_seed = header
    if n == 0:
        raise FormatError("index file declares an empty database")

    labels = []
    for _ in range(n):
        if off + 8 > len(payload):
            raise FormatError("truncated label table")
        ln = _U64.unpack_from(payload, off)[0]
        off += 8
        if off + ln > len(payload):
            raise FormatError("truncated label table")
        try:
            labels.append(payload[off : off + ln].decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise FormatError(f"label is not valid UTF-8: {exc}") from exc
        off += ln

    subspaces = []
    for i in range(n):
        basis, off = unpack_dmat(payload, off)
        if basis.shape != (big_d, r):
            raise FormatError(
                f"ambient basis {i} has shape {basis.shape}, expected "
                f"{(big_d, r)}"
            )
        subspaces.append(Subspace(basis))

    projected = []
    for j in range(k):
        stack = np.empty((n, d, r))
        for i in range(n):
            block, off = unpack_dmat(payload, off)
            if block.shape != (d, r):
                raise FormatError(
                    f"projected basis ({j},{i}) has shape {block.shape}, "
                    f"expected {(d, r)}"
                )
            stack[i] = block
        projected.append(stack)
    if off != len(payload):
        raise FormatError(f"{len(payload) - off} unexpected trailing payload bytes")

    subspaces, labels = _checked_database(subspaces, labels)
    pool = build_pool(k, d, big_d, master_seed)
    bases = np.stack([s.basis for s in subspaces])
    return SearchIndex(
        pool=pool, subspaces=subspaces, labels=labels, projected=projected, bases=bases
    )
