"""System configuration: regions, technologies, costs and topology.

Configs are read from INI-style files (see ``data/six_bus.cfg``); every
value can be overridden with ``section.key=value`` strings.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

HOURS_PER_YEAR = 8760


class ConfigError(ValueError):
    """Invalid or inconsistent system configuration."""


@dataclass(frozen=True)
class Technology:
    name: str
    install_cost: float  # £/MW/yr
    generation_cost: float  # £/MWh
    regions: tuple[int, ...]
    variable: bool = False  # availability scaled by the region's wind capacity factor


@dataclass(frozen=True)
class SystemConfig:
    regions: tuple[int, ...]
    technologies: tuple[Technology, ...]
    demand_regions: tuple[int, ...]
    edges: tuple[tuple[int, int], ...] = ()
    edge_costs: tuple[float, ...] = ()
    storage_regions: tuple[int, ...] = ()
    storage_install_cost: float = 0.0  # £/MWh/yr
    storage_efficiency: float = 1.0
    storage_self_loss: float = 0.0  # fraction per hour
    voll: float = 6000.0
    perturbation_epsilon: float = 1e-4
    _region_pos: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        regions = tuple(sorted(int(r) for r in self.regions))
        if len(set(regions)) != len(regions):
            raise ConfigError("duplicate region ids")
        object.__setattr__(self, "regions", regions)
        object.__setattr__(self, "_region_pos", {r: i for i, r in enumerate(regions)})
        known = set(regions)

        names = [t.name for t in self.technologies]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate technology names")
        for tech in self.technologies:
            if tech.install_cost < 0 or tech.generation_cost < 0:
                raise ConfigError(f"negative cost for technology {tech.name!r}")
            missing = set(tech.regions) - known
            if missing:
                raise ConfigError(f"technology {tech.name!r} references unknown regions {sorted(missing)}")

        for label, subset in (("demand_regions", self.demand_regions), ("storage_regions", self.storage_regions)):
            missing = set(subset) - known
            if missing:
                raise ConfigError(f"{label} references unknown regions {sorted(missing)}")
            object.__setattr__(self, label, tuple(sorted(subset)))

        if len(self.edge_costs) != len(self.edges):
            raise ConfigError("edge_costs must have one entry per edge")
        edges = []
        for (a, b), cost in zip(self.edges, self.edge_costs):
            if a == b:
                raise ConfigError(f"self-edge on region {a}")
            if a not in known or b not in known:
                raise ConfigError(f"edge ({a},{b}) references unknown region")
            if cost < 0:
                raise ConfigError(f"negative install cost on edge ({a},{b})")
            edges.append((min(a, b), max(a, b)))
        if len(set(edges)) != len(edges):
            raise ConfigError("duplicate transmission edge")
        order = sorted(range(len(edges)), key=lambda k: edges[k])
        object.__setattr__(self, "edges", tuple(edges[k] for k in order))
        object.__setattr__(self, "edge_costs", tuple(float(self.edge_costs[k]) for k in order))

        if self.storage_install_cost < 0:
            raise ConfigError("negative storage install cost")
        if not 0.0 < self.storage_efficiency <= 1.0:
            raise ConfigError("storage efficiency must lie in (0, 1]")
        if not 0.0 <= self.storage_self_loss < 1.0:
            raise ConfigError("storage self-loss must lie in [0, 1)")
        if self.voll < 0:
            raise ConfigError("value of lost load must be nonnegative")
        if self.perturbation_epsilon < 0:
            raise ConfigError("perturbation epsilon must be nonnegative")

    # -- derived index sets -------------------------------------------------

    @property
    def wind_regions(self) -> tuple[int, ...]:
        return tuple(sorted({r for t in self.technologies if t.variable for r in t.regions}))

    @property
    def gen_units(self) -> list[tuple[str, int]]:
        """Allowed (technology, region) pairs in deterministic order."""
        return [(t.name, r) for t in self.technologies for r in sorted(t.regions)]

    def tech(self, name: str) -> Technology:
        for t in self.technologies:
            if t.name == name:
                return t
        raise KeyError(name)

    def region_index(self, region: int) -> int:
        return self._region_pos[region]

    def region_factor(self, region: int) -> float:
        """Install-cost multiplier breaking ties between otherwise identical regions."""
        return 1.0 + self.perturbation_epsilon * self._region_pos[region]

    def edge_factor(self, k: int) -> float:
        return 1.0 + self.perturbation_epsilon * k

    # -- cost vectors aligned with gen_units / edges / storage_regions -------

    def gen_install_costs(self) -> np.ndarray:
        return np.array([self.tech(i).install_cost * self.region_factor(r) for i, r in self.gen_units])

    def gen_costs(self) -> np.ndarray:
        return np.array([self.tech(i).generation_cost for i, _ in self.gen_units])

    def gen_variable(self) -> np.ndarray:
        return np.array([self.tech(i).variable for i, _ in self.gen_units], dtype=bool)

    def edge_install_costs(self) -> np.ndarray:
        return np.array([c * self.edge_factor(k) for k, c in enumerate(self.edge_costs)])

    def storage_install_costs(self) -> np.ndarray:
        return np.array([self.storage_install_cost * self.region_factor(r) for r in self.storage_regions])


# -- INI parsing -------------------------------------------------------------


def _ints(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(x) for x in text.replace(";", ",").split(","))


def _edge(text: str) -> tuple[int, int]:
    a, b = text.strip().split("-")
    return int(a), int(b)


def apply_overrides(parser: configparser.ConfigParser, overrides: dict[str, str] | None) -> None:
    """Apply ``section.key=value`` overrides in place.

    The longest existing section name that prefixes the dotted key wins,
    so ``tech.wind.install_cost`` targets section ``tech.wind``.
    """
    for dotted, value in (overrides or {}).items():
        target = None
        for section in sorted(parser.sections(), key=len, reverse=True):
            if dotted.startswith(section + "."):
                target = section
                break
        if target is None:
            section, _, key = dotted.partition(".")
            if not key:
                raise ConfigError(f"override {dotted!r} must be of the form section.key=value")
            parser.add_section(section)
            target = section
        parser.set(target, dotted[len(target) + 1:], str(value))


def config_from_parser(parser: configparser.ConfigParser) -> SystemConfig:
    try:
        system = parser["system"]
        techs = []
        for section in parser.sections():
            if not section.startswith("tech."):
                continue
            s = parser[section]
            techs.append(Technology(
                name=section[len("tech."):],
                install_cost=s.getfloat("install_cost"),
                generation_cost=s.getfloat("generation_cost", 0.0),
                regions=_ints(s.get("regions", "")),
                variable=s.getboolean("variable", False),
            ))
        edges, edge_costs = (), ()
        if parser.has_section("transmission"):
            tr = parser["transmission"]
            edges = tuple(_edge(e) for e in tr.get("edges", "").split(",") if e.strip())
            default = tr.getfloat("install_cost", 0.0)
            edge_costs = tuple(
                tr.getfloat(f"install_cost.{a}-{b}", tr.getfloat(f"install_cost.{b}-{a}", default))
                for a, b in edges
            )
        sto = parser["storage"] if parser.has_section("storage") else {}
        return SystemConfig(
            regions=_ints(system["regions"]),
            technologies=tuple(techs),
            demand_regions=_ints(system.get("demand_regions", "")),
            edges=edges,
            edge_costs=edge_costs,
            storage_regions=_ints(sto.get("regions", "")) if sto else (),
            storage_install_cost=float(sto.get("install_cost", 0.0)) if sto else 0.0,
            storage_efficiency=float(sto.get("efficiency", 1.0)) if sto else 1.0,
            storage_self_loss=float(sto.get("self_loss", 0.0)) if sto else 0.0,
            voll=system.getfloat("voll", 6000.0),
            perturbation_epsilon=system.getfloat("perturbation_epsilon", 1e-4),
        )
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed config: {exc}") from exc


def _parser() -> configparser.ConfigParser:
    return configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))


def load_config(path: str | Path | None = None, overrides: dict[str, str] | None = None) -> SystemConfig:
    """Read a config file (the shipped six-bus system when ``path`` is None)."""
    return config_from_parser(read_parser(path, overrides))


def read_parser(path=None, overrides=None) -> configparser.ConfigParser:
    parser = _parser()
    if path is None:
        parser.read_string(resources.files("aposteriori").joinpath("data/six_bus.cfg").read_text())
    else:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        parser.read(path)
    apply_overrides(parser, overrides)
    return parser


def default_config(**changes) -> SystemConfig:
    """The six-bus system; keyword arguments replace top-level fields."""
    cfg = load_config()
    if changes:
        from dataclasses import replace
        cfg = replace(cfg, **changes)
    return cfg


def config_to_ini(config: SystemConfig) -> str:
    """Serialise a config back to the INI layout accepted by :func:`load_config`."""
    parser = _parser()
    join = lambda xs: ", ".join(str(x) for x in xs)  # noqa: E731
    parser["system"] = {
        "regions": join(config.regions),
        "demand_regions": join(config.demand_regions),
        "voll": repr(config.voll),
        "perturbation_epsilon": repr(config.perturbation_epsilon),
    }
    for t in config.technologies:
        parser[f"tech.{t.name}"] = {
            "install_cost": repr(t.install_cost),
            "generation_cost": repr(t.generation_cost),
            "regions": join(t.regions),
            "variable": "yes" if t.variable else "no",
        }
    tr = {"edges": join(f"{a}-{b}" for a, b in config.edges), "install_cost": "0.0"}
    for (a, b), c in zip(config.edges, config.edge_costs):
        tr[f"install_cost.{a}-{b}"] = repr(c)
    parser["transmission"] = tr
    parser["storage"] = {
        "regions": join(config.storage_regions),
        "install_cost": repr(config.storage_install_cost),
        "efficiency": repr(config.storage_efficiency),
        "self_loss": repr(config.storage_self_loss),
    }
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
