"""Direct Simulation Monte Carlo for a hard-sphere gas in a closed box.

Units are non-dimensional (mass and Boltzmann constant default to 1). Each
step drifts particles, reflects them specularly off the walls, re-bins
them into cells and performs no-time-counter collisions cell by cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .linalg import make_rng, sample_unit_sphere


@dataclass
class DsmcConfig:
    n_particles: int = 10_000
    f_n: float = 1.0
    diameter: float = 0.005
    tau: float = 0.005
    box: tuple = (1.0, 1.0, 1.0)
    cells: tuple = (5, 5, 5)
    mass: float = 1.0
    kT: float = 1.0
    seed: int = 0
    n_steps: int = 2000
    init: str = "equal_speed"  # or "maxwell"
    vr_max_factor: float = 3.0
    hist_bins: int = 200
    hist_speed_factor: float = 3.0
    record_every: int = 1

    def __post_init__(self):
        self.box = tuple(float(b) for b in self.box)
        self.cells = tuple(int(c) for c in self.cells)
        self.validate()

    @property
    def rms_speed(self) -> float:
        return math.sqrt(3.0 * self.kT / self.mass)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.box)) / int(np.prod(self.cells))

    def validate(self) -> None:
        if self.n_particles < 1:
            raise ValueError("n_particles: need at least one particle")
        for name in ("f_n", "diameter", "tau", "mass", "kT", "vr_max_factor", "hist_speed_factor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name}: must be > 0")
        if len(self.box) != 3 or min(self.box) <= 0:
            raise ValueError("box: need three positive extents")
        if len(self.cells) != 3 or min(self.cells) < 1:
            raise ValueError("cells: need three positive counts")
        if self.n_steps < 0:
            raise ValueError("n_steps: must be >= 0")
        if self.init not in ("equal_speed", "maxwell"):
            raise ValueError(f"init: unknown start {self.init!r}")
        if self.hist_bins < 1 or self.record_every < 1:
            raise ValueError("hist_bins/record_every: must be >= 1")
        # a particle at 6x the rms speed must not cross a whole box extent in one step
        if 6.0 * self.rms_speed * self.tau >= min(self.box):
            raise ValueError(f"tau: time step {self.tau} lets particles cross the box in one step")


@dataclass
class ParticleSystem:
    positions: np.ndarray
    velocities: np.ndarray
    box: np.ndarray
    cells: tuple
    vr_max: np.ndarray
    cell_of: np.ndarray = field(default=None, repr=False)
    order: np.ndarray = field(default=None, repr=False)
    starts: np.ndarray = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def kinetic_energy(self, mass=1.0) -> float:
        return 0.5 * mass * float(np.sum(self.velocities * self.velocities))

    def momentum(self, mass=1.0) -> np.ndarray:
        return mass * self.velocities.sum(axis=0)

    def sort_into_cells(self) -> None:
        """Rebuild the cell lists (``order[starts[c]:starts[c+1]]`` are cell ``c``'s particles)."""
        cells = np.asarray(self.cells)
        idx = np.floor(self.positions / self.box * cells).astype(np.int64)
        np.clip(idx, 0, cells - 1, out=idx)
        flat = (idx[:, 0] * cells[1] + idx[:, 1]) * cells[2] + idx[:, 2]
        self.cell_of = flat
        self.order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=int(np.prod(cells)))
        self.starts = np.concatenate([[0], np.cumsum(counts)])

    def cell_members(self, c: int) -> np.ndarray:
        return self.order[self.starts[c]:self.starts[c + 1]]


def init_system(cfg: DsmcConfig) -> ParticleSystem:
    rng = make_rng(cfg.seed, "dsmc.init")
    box = np.asarray(cfg.box)
    pos = rng.random((cfg.n_particles, 3)) * box
    if cfg.init == "maxwell":
        vel = rng.normal(0.0, math.sqrt(cfg.kT / cfg.mass), size=(cfg.n_particles, 3))
    else:
        vel = sample_unit_sphere(rng, 3, size=cfg.n_particles) * cfg.rms_speed
    # rms relative speed is sqrt(2) * rms speed
    vr0 = cfg.vr_max_factor * math.sqrt(2.0) * cfg.rms_speed
    system = ParticleSystem(pos, vel, box, cfg.cells, np.full(int(np.prod(cfg.cells)), vr0))
    system.sort_into_cells()
    return system


def drift(system: ParticleSystem, tau: float) -> None:
    if tau:
        system.positions += system.velocities * tau


def wall_reflect(system: ParticleSystem, box=None) -> None:
    """Specular reflection: mirror any escaped coordinate and flip its velocity."""
    box = system.box if box is None else np.asarray(box, dtype=np.float64)
    x, v = system.positions, system.velocities
    for axis in range(3):
        length = box[axis]
        while True:
            lo = x[:, axis] < 0.0
            hi = x[:, axis] > length
            if not (lo.any() or hi.any()):
                break
            x[lo, axis] = -x[lo, axis]
            v[lo, axis] = -v[lo, axis]
            x[hi, axis] = 2.0 * length - x[hi, axis]
            v[hi, axis] = -v[hi, axis]


def candidate_count(n_c: int, f_n: float, diameter: float, vr_max: float, tau: float, cell_volume: float) -> float:
    """No-time-counter expected number of candidate pairs in one cell."""
    return n_c * (n_c - 1) * f_n * math.pi * diameter**2 * vr_max * tau / (2.0 * cell_volume)


def scatter(vi, vj, r2: float, r3: float):
    """Hard-sphere post-collision velocities for uniform draws ``r2``, ``r3``."""
    vr = math.sqrt(sum((a - b) ** 2 for a, b in zip(vi, vj)))
    phi = 2.0 * math.pi * r2
    cos_t = 2.0 * r3 - 1.0
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    half = (0.5 * vr * sin_t * math.cos(phi), 0.5 * vr * sin_t * math.sin(phi), 0.5 * vr * cos_t)
    cm = [0.5 * (a + b) for a, b in zip(vi, vj)]
    return [c + h for c, h in zip(cm, half)], [c - h for c, h in zip(cm, half)]


@dataclass
class CollisionStats:
    candidates: int = 0
    collisions: int = 0
    expected_collisions: float = 0.0


def collide_cells(system: ParticleSystem, cfg: DsmcConfig, rng: np.random.Generator, stats_out: CollisionStats | None = None) -> int:
    """One NTC collision sweep over every cell; returns the number of collisions.

    ``stats_out``, when given, also accumulates the exact expected
    collision count for this sweep (candidate count times the mean
    acceptance probability over all pairs of the cell) for diagnostics.
    """
    vel = system.velocities
    vc = cfg.cell_volume
    count = 0
    for c in range(system.vr_max.shape[0]):
        members = system.cell_members(c)
        n_c = members.shape[0]
        if n_c < 2:
            continue
        vr_max = system.vr_max[c]
        expect = candidate_count(n_c, cfg.f_n, cfg.diameter, vr_max, cfg.tau, vc)
        if stats_out is not None:
            cv = vel[members]
            d = cv[:, None, :] - cv[None, :, :]
            vr = np.sqrt(np.einsum("ijk,ijk->ij", d, d))[np.triu_indices(n_c, 1)]
            stats_out.expected_collisions += expect * float(np.minimum(vr / vr_max, 1.0).mean())
        m_cand = int(expect)
        if rng.random() < expect - m_cand:
            m_cand += 1
        if m_cand == 0:
            continue
        picks_a = rng.integers(0, n_c, size=m_cand)
        picks_b = rng.integers(0, n_c - 1, size=m_cand)
        draws = rng.random((m_cand, 3))
        local = vel[members].tolist()
        touched = set()
        for k in range(m_cand):
            a = int(picks_a[k])
            b = int(picks_b[k])
            if b >= a:
                b += 1
            vi, vj = local[a], local[b]
            vr = math.sqrt((vi[0] - vj[0]) ** 2 + (vi[1] - vj[1]) ** 2 + (vi[2] - vj[2]) ** 2)
            if vr > vr_max:
                vr_max = vr
            if vr / vr_max > draws[k, 0]:
                local[a], local[b] = scatter(vi, vj, draws[k, 1], draws[k, 2])
                touched.add(a)
                touched.add(b)
                count += 1
        system.vr_max[c] = vr_max
        if touched:
            t = sorted(touched)
            vel[members[t]] = np.asarray([local[i] for i in t])
        if stats_out is not None:
            stats_out.candidates += m_cand
    if stats_out is not None:
        stats_out.collisions += count
    return count


# -- distribution diagnostics ----------------------------------------------


@dataclass
class VelocityHistogram:
    edges: np.ndarray
    density: np.ndarray

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def total_mass(self) -> float:
        return float(np.sum(self.density * self.widths))


def velocity_histogram(velocities, speed_max: float, bins: int = 200) -> VelocityHistogram:
    """Histogram of the isotropic velocity density.

    Binning is over ``u = 4/3 pi |v|**3``, the volume of the velocity ball
    of radius ``|v|``; for an isotropic gas the density in ``u`` equals the
    three-dimensional velocity density ``f(v)``. Speeds above ``speed_max``
    are counted in the last bin.
    """
    v = np.asarray(velocities, dtype=np.float64)
    s = np.sqrt(np.einsum("ij,ij->i", v, v))
    u_max = 4.0 / 3.0 * math.pi * speed_max**3
    u = np.minimum(4.0 / 3.0 * math.pi * s**3, u_max)
    edges = np.linspace(0.0, u_max, bins + 1)
    counts, _ = np.histogram(u, bins=edges)
    density = counts / (s.shape[0] * np.diff(edges))
    return VelocityHistogram(edges, density)


def h_function(hist: VelocityHistogram) -> float:
    """Discrete ``sum f ln f * width`` with ``0 ln 0 = 0``."""
    mass = hist.total_mass()
    if abs(mass - 1.0) > 1e-9:
        raise ValueError(f"histogram is not normalised (integral {mass})")
    f = hist.density
    pos = f > 0
    return float(np.sum(f[pos] * np.log(f[pos]) * hist.widths[pos]))


def mb_distance(velocities, mass: float = 1.0, kT: float | None = None) -> float:
    """Kolmogorov-Smirnov distance of the speed sample from Maxwell-Boltzmann.

    The temperature is taken from the sample's mean kinetic energy unless
    ``kT`` is given.
    """
    v = np.asarray(velocities, dtype=np.float64)
    if v.shape[0] < 1000:
        raise ValueError("mb_distance needs at least 1000 particles")
    sq = np.einsum("ij,ij->i", v, v)
    if kT is None:
        kT = mass * float(sq.mean()) / 3.0
    scale = math.sqrt(kT / mass)
    return float(stats.kstest(np.sqrt(sq), stats.maxwell(scale=scale).cdf).statistic)


# -- driver -----------------------------------------------------------------


H_SERIES_COLUMNS = ("step", "time", "H", "mb_distance", "kinetic_energy")


class DsmcSimulation:
    def __init__(self, cfg: DsmcConfig):
        self.cfg = cfg
        self.system = init_system(cfg)
        self.rng = make_rng(cfg.seed, "dsmc.collide")
        self.step_count = 0
        self.stats = CollisionStats()
        self.speed_max = cfg.hist_speed_factor * cfg.rms_speed

    def step(self, track_expected: bool = False) -> int:
        sys_ = self.system
        drift(sys_, self.cfg.tau)
        wall_reflect(sys_)
        sys_.sort_into_cells()
        n = collide_cells(sys_, self.cfg, self.rng, self.stats if track_expected else None)
        if not track_expected:
            self.stats.collisions += n
        self.step_count += 1
        return n

    def h_value(self) -> float:
        return h_function(velocity_histogram(self.system.velocities, self.speed_max, self.cfg.hist_bins))

    def diagnostics(self) -> dict:
        v = self.system.velocities
        return {
            "step": self.step_count,
            "time": self.step_count * self.cfg.tau,
            "H": self.h_value(),
            "mb_distance": mb_distance(v, self.cfg.mass) if v.shape[0] >= 1000 else float("nan"),
            "kinetic_energy": self.system.kinetic_energy(self.cfg.mass),
        }

    def run(self, n_steps: int | None = None, snapshot=None) -> list[dict]:
        """Advance ``n_steps`` steps; returns a diagnostics row every ``record_every`` steps.

        ``snapshot(step, velocities)`` is called at each recorded step if given.
        """
        n_steps = self.cfg.n_steps if n_steps is None else n_steps
        rows = []
        for _ in range(n_steps):
            self.step()
            if self.step_count % self.cfg.record_every == 0:
                rows.append(self.diagnostics())
                if snapshot is not None:
                    snapshot(self.step_count, self.system.velocities)
        return rows


def smooth(series, window: int = 10) -> np.ndarray:
    """Trailing moving average (``valid`` part only)."""
    x = np.asarray(series, dtype=np.float64)
    if x.shape[0] < window:
        return x.copy()
    return np.convolve(x, np.ones(window) / window, mode="valid")
