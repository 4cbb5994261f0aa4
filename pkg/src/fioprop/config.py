"""Experiment configuration: JSON in, validated dataclass out.

One config drives a CLI run; suites pull the fields they need.  Validation
errors name the offending field so batch users can fix configs without
reading tracebacks.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import ConfigError, FiopropError
from .potential import MODEL_FACTORIES

SUITE_NAMES = ("prop21", "prop22", "prop23", "thm31", "main")


@dataclass
class ExperimentConfig:
    # model
    model: str = "scaled_bump"
    model_params: dict = field(default_factory=dict)
    # suite selection and bookkeeping
    suites: list = field(default_factory=lambda: ["all"])
    seed: int = 1234
    out_dir: str = "results"
    dump_kernels: bool = False
    # kernel grid
    n_points: int = 256
    half_width: float = 480.0
    # time structure
    t_start: float = 10.0  # threshold time T
    horizon: float = 4.0
    dtau: float = 2.5
    max_span: float = 160.0
    T_list: list | None = None  # defaults to [T, 2T, 4T, 8T]
    cross_T: float | None = 20.0
    dt_ref: float = 0.02
    # (s, t, x, xi) scan lattices for the flow / inverse-map suites
    n_s_scan: int = 12
    s_scan_decades: float = 2.0
    lattice_points: int = 9
    lattice_x_extent: float = 4.0
    lattice_xi_extent: float = 2.0
    t_factors: list = field(default_factory=lambda: [1.5, 2.0, 4.0])
    # phase-lattice suite
    phase_grid_points: int = 64
    phase_half_width: float = 20.0
    phase_pairs: list | None = None  # defaults to [[T, 2T], [2T, 4T]]
    fd_delta: float = 1e-3
    # measurement domain (absolute cuts; see README on wrap-safety)
    xi_cut: float = 0.4
    y_cut: float = 60.0
    g_band: float = 0.6
    window_frac: float = 0.2
    # tolerances
    flow_tol: float = 1e-10
    solve_tol: float = 1e-10
    picard_tol: float = 1e-7
    neumann_tol: float = 1e-11

    def resolved_T_list(self):
        if self.T_list is not None:
            return [float(t) for t in self.T_list]
        return [self.t_start * f for f in (1.0, 2.0, 4.0, 8.0)]

    def resolved_phase_pairs(self):
        if self.phase_pairs is not None:
            return [(float(a), float(b)) for a, b in self.phase_pairs]
        T = self.t_start
        return [(T, 2.0 * T), (2.0 * T, 4.0 * T)]

    def resolved_suites(self):
        names = []
        for s in self.suites:
            if s == "all":
                names.extend(SUITE_NAMES)
            else:
                names.append(s)
        seen = []
        for s in names:
            if s not in seen:
                seen.append(s)
        return seen

    def validate(self):
        if self.model not in MODEL_FACTORIES:
            raise ConfigError(f"model: unknown {self.model!r}; known {sorted(MODEL_FACTORIES)}")
        try:
            MODEL_FACTORIES[self.model](**self.model_params)
        except TypeError as exc:
            raise ConfigError(f"model_params: {exc}") from exc
        except FiopropError as exc:
            raise ConfigError(f"model_params: {exc}") from exc
        for s in self.suites:
            if s != "all" and s not in SUITE_NAMES:
                raise ConfigError(f"suites: unknown suite {s!r}; known {SUITE_NAMES + ('all',)}")
        if self.n_points % 2 != 0 or self.n_points < 16:
            raise ConfigError(f"n_points: must be even and >= 16, got {self.n_points}")
        if self.n_points > 512:
            raise ConfigError(f"n_points: must be <= 512 (reference builds), got {self.n_points}")
        if not self.half_width > 0:
            raise ConfigError("half_width: must be positive")
        if not self.t_start >= 1.0:
            raise ConfigError(f"t_start: threshold time must be >= 1, got {self.t_start}")
        if not self.horizon > 1.0:
            raise ConfigError("horizon: must exceed 1")
        if not self.dtau > 0:
            raise ConfigError("dtau: lattice spacing must be positive")
        if not self.max_span > 0:
            raise ConfigError("max_span: must be positive")
        if self.lattice_points < 5:
            raise ConfigError("lattice_points: finite differences need >= 5")
        for name in ("flow_tol", "solve_tol"):
            v = getattr(self, name)
            if not 1e-13 <= v <= 1e-6:
                raise ConfigError(f"{name}: must lie in [1e-13, 1e-6], got {v}")
        if not 0 < self.picard_tol <= 1e-3:
            raise ConfigError("picard_tol: must lie in (0, 1e-3]")
        if not 0 < self.neumann_tol <= 1e-6:
            raise ConfigError("neumann_tol: must lie in (0, 1e-6]")
        for name in ("xi_cut", "y_cut", "g_band", "window_frac", "fd_delta"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name}: must be positive")
        if any(f <= 1.0 for f in self.t_factors):
            raise ConfigError("t_factors: every factor must exceed 1")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self, path=None):
        payload = json.dumps(self.to_dict(), indent=2) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(payload)
        return payload


def config_from_dict(data):
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    return ExperimentConfig(**data).validate()


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be an object, got {type(data).__name__}")
    return config_from_dict(data)
