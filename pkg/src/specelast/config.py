"""Experiment configuration loaded from a flat INI-style key-value file.

Schema (all keys optional, section [experiment]):

    d            spatial dimension, 1..3                     (default 2)
    N            degree or comma list of degrees             (default 10, 20, 40)
    lambda       first Lame parameter > 0                    (default 0.5)
    mu           shear modulus > 0                           (default 4.0)
    T            final time > 0                              (default 3.0)
    dt           time step > 0                               (default 0.01)
    scheme       newmark | rk4                               (default newmark)
    seed         base RNG seed                               (default 0)
    tol          null-control verification tolerance         (default 1e-3)
    cg_tol       CG relative residual target                 (default 1e-6)
    max_iter     CG iteration cap                            (default 900)
    weight_g     auxiliary-control weight >= 0               (default 0.25)
    gamma_faces  comma list of control face ids, empty =     (default empty)
                 the d faces {x_j = +1}
    amplitude    initial-displacement amplitude for control  (default 0.2)
    n_seeds      random probes per case in observe scans     (default 3)
    output_dir   output directory                            (default out)

The defaults reproduce the reference experiment: d=2, lambda=0.5, mu=4,
T=3, dt=0.01, N in {10, 20, 40}.
"""

import configparser
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class ExperimentConfig:
    d: int = 2
    n_values: tuple = (10, 20, 40)
    lam: float = 0.5
    mu: float = 4.0
    T: float = 3.0
    dt: float = 0.01
    scheme: str = "newmark"
    seed: int = 0
    tol: float = 1e-3
    cg_tol: float = 1e-6
    max_iter: int = 900
    weight_g: float = 0.25
    gamma_faces: tuple = ()
    amplitude: float = 0.2
    n_seeds: int = 3
    output_dir: str = "out"
    n_explicit: bool = False

    def validate(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"d must be 1, 2 or 3, got {self.d}")
        if not self.n_values or any(n < 2 for n in self.n_values):
            raise ValueError(f"all N must be >= 2, got {self.n_values}")
        for name in ("lam", "mu", "T", "dt", "tol", "cg_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.scheme not in ("newmark", "rk4"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.max_iter < 1 or self.n_seeds < 1:
            raise ValueError("max_iter and n_seeds must be >= 1")
        if self.weight_g < 0:
            raise ValueError("weight_g must be >= 0")
        for j in self.gamma_faces:
            if not 1 <= j <= 2 * self.d:
                raise ValueError(f"gamma face id {j} outside 1..{2 * self.d}")
        return self

    @property
    def gamma_faces_or_default(self):
        return self.gamma_faces if self.gamma_faces else tuple(range(1, self.d + 1))


def _parse_tuple(text, conv):
    items = [t.strip() for t in text.replace(";", ",").split(",")]
    return tuple(conv(t) for t in items if t)


def load_config(path=None, overrides=None) -> ExperimentConfig:
    """Read the config file (if any), apply CLI overrides, validate."""
    cfg = ExperimentConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        with open(path) as fh:
            parser.read_file(fh)
        if not parser.has_section("experiment"):
            raise ValueError(f"{path}: missing [experiment] section")
        sec = parser["experiment"]
        known = {
            "d": ("d", int), "n": ("n_values", lambda s: _parse_tuple(s, int)),
            "lambda": ("lam", float), "mu": ("mu", float),
            "t": ("T", float), "dt": ("dt", float), "scheme": ("scheme", str),
            "seed": ("seed", int), "tol": ("tol", float), "cg_tol": ("cg_tol", float),
            "max_iter": ("max_iter", int), "weight_g": ("weight_g", float),
            "gamma_faces": ("gamma_faces", lambda s: _parse_tuple(s, int)),
            "amplitude": ("amplitude", float),
            "n_seeds": ("n_seeds", int), "output_dir": ("output_dir", str),
        }
        updates = {}
        for key in sec:
            if key not in known:
                raise ValueError(f"{path}: unknown config key {key!r}")
            attr, conv = known[key]
            updates[attr] = conv(sec[key])
        if "n_values" in updates:
            updates["n_explicit"] = True
        cfg = replace(cfg, **updates)
    if overrides:
        if "n_values" in overrides:
            overrides = dict(overrides, n_explicit=True)
        cfg = replace(cfg, **overrides)
    return cfg.validate()
