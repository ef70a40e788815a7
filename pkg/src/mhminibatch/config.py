"""Experiment configuration files.

The format is flat ``key = value`` text. ``#`` starts a comment, blank lines
are ignored, and dotted keys group related settings (``barker.m = 50``).
Every key has a default except ``model`` and ``data.source``. Unknown keys
and malformed values are reported with their line number.
"""
from dataclasses import dataclass, field

import numpy as np

from .acceptance import (
    AustereTest,
    BarkerTestConfig,
    FullBarkerTest,
    FullMetropolisTest,
    MinibatchBarkerTest,
    SubLhdTest,
)
from .chain import ChainConfig, ScheduleEntry
from .correction import default_table, load_table
from .data import (
    generate_gaussian_data,
    generate_mixture_data,
    load_mnist_binary,
    trial_seed,
)
from .metrics import MIXTURE_GRID, Grid2D
from .models import GaussianMeanModel, LogisticRegressionModel, MixtureModel, RandomWalkProposal

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config", "SCHEMA"]


class ConfigError(ValueError):
    pass


def _floats(text):
    parts = [p for p in text.replace(",", " ").split()]
    if not parts:
        raise ValueError("expected one or more numbers")
    return tuple(float(p) for p in parts)


def _choice(*options):
    def conv(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return conv


def _schedule(text):
    entries = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        bits = chunk.split(":")
        if len(bits) not in (2, 3):
            raise ValueError(f"schedule entry {chunk!r} must be start:K or start:K:cov")
        cov = float(bits[2]) if len(bits) == 3 else None
        entries.append(ScheduleEntry(int(bits[0]), float(bits[1]), cov))
    return tuple(entries)


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise ValueError("expected a positive integer")
    return v


MODELS = ("mixture", "gaussian", "logistic")
SOURCES = ("mixture", "gaussian", "idx")
TESTS = ("minibatch", "full_barker", "full_metropolis", "austere_c", "austere_nc", "sublhd")

# key -> (converter, default); a default of None marks a required key
SCHEMA = {
    "model": (_choice(*MODELS), None),
    "model.temperature": (float, 1.0),
    "data.source": (_choice(*SOURCES), None),
    "data.n": (_positive_int, 1_000_000),
    "data.seed": (int, 0),
    "data.theta": (_floats, (0.0, 1.0)),
    "data.mean": (float, 0.5),
    "data.images": (str, ""),
    "data.labels": (str, ""),
    "data.test_images": (str, ""),
    "data.test_labels": (str, ""),
    "data.pos_digit": (int, 7),
    "data.neg_digit": (int, 1),
    "proposal.std": (_floats, ()),
    "proposal.cov": (_floats, ()),
    "chain.T": (_positive_int, 1000),
    "chain.trials": (_positive_int, 1),
    "chain.seed": (int, 0),
    "chain.theta0": (_floats, (0.0,)),
    "chain.schedule": (_schedule, ()),
    "test": (_choice(*TESTS), "minibatch"),
    "barker.m": (int, 50),
    "barker.delta": (float, 1.5),
    "barker.table": (str, ""),
    "austere.m": (int, 50),
    "austere.eps": (float, 0.005),
    "sublhd.m": (int, 50),
    "sublhd.gamma": (float, 1.5),
    "sublhd.p": (float, 2.0),
    "sublhd.delta": (float, 0.01),
    "metrics.grid": (Grid2D.parse, MIXTURE_GRID),
    "output.dir": (str, "results"),
}


@dataclass
class ExperimentConfig:
    """Resolved settings plus the raw text of every explicitly set key."""

    values: dict
    raw: dict = field(default_factory=dict)
    source: str = "<config>"

    def __getitem__(self, key):
        return self.values[key]

    # -- derived objects ---------------------------------------------------------

    def dataset(self):
        src = self["data.source"]
        if src == "mixture":
            theta = self["data.theta"]
            if len(theta) != 2:
                raise ConfigError("data.theta needs two numbers for mixture data")
            return generate_mixture_data(self["data.n"], theta=theta, seed=self["data.seed"])
        if src == "gaussian":
            return generate_gaussian_data(self["data.n"], mean=self["data.mean"],
                                          seed=self["data.seed"])
        return self._idx(self["data.images"], self["data.labels"], "data.images")

    def test_set(self):
        if not self["data.test_images"]:
            return None
        return self._idx(self["data.test_images"], self["data.test_labels"], "data.test_images")

    def _idx(self, images, labels, key):
        if not images or not labels:
            raise ConfigError(f"{key} and its labels file must both be set")
        try:
            return load_mnist_binary(images, labels, self["data.pos_digit"], self["data.neg_digit"])
        except FileNotFoundError as exc:
            raise ConfigError(f"{key}: {exc}") from exc

    def model(self, dataset=None):
        data = self.dataset() if dataset is None else dataset
        kind = self["model"]
        K = self["model.temperature"]
        if kind == "mixture":
            return MixtureModel(data, temperature=K)
        if kind == "gaussian":
            return GaussianMeanModel(data, temperature=K)
        if data.labels is None:
            raise ConfigError("the logistic model needs labelled data")
        return LogisticRegressionModel(data, temperature=K)

    def final_temperature(self):
        sched = self["chain.schedule"]
        return max(sched, key=lambda e: e.start).K if sched else self["model.temperature"]

    def proposal(self, dim):
        std, cov = self["proposal.std"], self["proposal.cov"]
        if std and cov:
            raise ConfigError("set only one of proposal.std and proposal.cov")
        if std:
            var = np.square(std)
        elif cov:
            var = np.asarray(cov)
        else:
            raise ConfigError("proposal.std or proposal.cov must be set")
        if var.size not in (1, dim):
            raise ConfigError(f"proposal needs 1 or {dim} values, got {var.size}")
        return RandomWalkProposal(np.broadcast_to(var, (dim,)).copy())

    def theta0(self, dim):
        t = np.asarray(self["chain.theta0"], dtype=float)
        if t.size not in (1, dim):
            raise ConfigError(f"chain.theta0 needs 1 or {dim} values, got {t.size}")
        return np.broadcast_to(t, (dim,)).copy()

    def test(self):
        name = self["test"]
        if name == "minibatch":
            path = self["barker.table"]
            table = load_table(path) if path else default_table()
            return MinibatchBarkerTest(BarkerTestConfig(self["barker.m"], self["barker.delta"], table))
        if name == "full_barker":
            return FullBarkerTest()
        if name == "full_metropolis":
            return FullMetropolisTest()
        if name.startswith("austere"):
            variant = "conservative" if name == "austere_c" else "nonconservative"
            return AustereTest(variant, self["austere.m"], self["austere.eps"])
        return SubLhdTest(self["sublhd.m"], self["sublhd.gamma"], self["sublhd.p"],
                          self["sublhd.delta"])

    def chain_config(self, trial, dim, test=None):
        return ChainConfig(
            T=self["chain.T"],
            test=self.test() if test is None else test,
            proposal=self.proposal(dim),
            theta0=self.theta0(dim),
            seed=trial_seed(self["chain.seed"], trial),
            schedule=self["chain.schedule"],
        )

    def render(self):
        """Canonical text of the resolved configuration (every key, sorted)."""
        lines = []
        for key in sorted(SCHEMA):
            if key in self.raw:
                lines.append(f"{key} = {self.raw[key]}")
            elif self.values[key] not in (None, ()):
                lines.append(f"{key} = {_render_default(self.values[key])}")
        return "\n".join(lines) + "\n"


def _render_default(v):
    if isinstance(v, tuple):
        if v and isinstance(v[0], ScheduleEntry):
            return ", ".join(f"{e.start}:{e.K!r}" + (f":{e.cov!r}" if e.cov is not None else "")
                             for e in v)
        return ", ".join(repr(x) for x in v)
    return str(v)


def parse_config(text, source="<config>", overrides=()):
    """Parse config text, then apply ``key=value`` override strings."""
    raw, where = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {body!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        raw[key] = value
        where[key] = f"{source}:{lineno}"
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"override: unknown key {key!r}")
        raw[key] = value
        where[key] = "override"

    values = {}
    for key, (conv, default) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = conv(raw[key])
            except ValueError as exc:
                raise ConfigError(f"{where[key]}: bad value for {key}: {exc}") from None
        elif default is None:
            raise ConfigError(f"{source}: required key {key!r} is missing")
        else:
            values[key] = default
    for e in values["chain.schedule"]:
        if not e.K > 0:
            raise ConfigError(f"{where['chain.schedule']}: scheduled temperature must be positive")
    if not values["model.temperature"] > 0:
        raise ConfigError(f"{where.get('model.temperature', source)}: temperature must be positive")
    return ExperimentConfig(values, raw, source)


def load_config(path, overrides=()):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path), overrides)
