"""Run configuration: a strict JSON schema mirroring ExperimentSpec.

A config names a built-in experiment (plus optional section overrides) or
spells out a custom system in full. Resolved configs are fully explicit
and re-runnable; unknown keys are rejected everywhere. Complex numbers are
encoded as [re, im] pairs.
"""

from __future__ import annotations

import json

import numpy as np

from .dynamics import (
    HamiltonianModel,
    HamiltonianTerm,
    TimeGrid,
    UncertaintyForm,
    WaveformSpec,
)
from .errors import ConfigError
from .experiments import (
    CAVITY_DIPOLE,
    CAVITY_OMEGA,
    EXPERIMENT_IDS,
    ExperimentSpec,
    build,
)
from .metrics import SubsystemSplit
from .slc import TargetSpec, TrainConfig
from .uncertainty import UncertaintyChannelSpec

DEFAULT_SEED = 1729

_TOP_KEYS = {
    "experiment", "seed", "grid", "model", "psi0", "target", "initial_controls",
    "bounds", "train_sampling", "train_class_map", "test_sampling", "training",
    "physical_params",
}

_BUILDER_PARAMS = {
    "vtype_single": set(),
    "vtype_timevarying": set(),
    "vtype_nominal_baseline": set(),
    "supercond": {"reduced_grid"},
    "cavity": {"photon_number", "field_frequency", "coupling_1", "coupling_2"},
}


def _expect_keys(d: dict, allowed: set, required: set, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(d)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")


def encode_complex_vector(v) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=np.complex128)]


def decode_complex_vector(data, where: str) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a list of [re, im] pairs") from None
    return arr[:, 0] + 1j * arr[:, 1]


def encode_complex_matrix(m) -> list:
    return [encode_complex_vector(row) for row in np.asarray(m, dtype=np.complex128)]


def decode_complex_matrix(data, where: str) -> np.ndarray:
    if not isinstance(data, list) or not data:
        raise ConfigError(f"{where}: expected a matrix")
    return np.stack([decode_complex_vector(row, where) for row in data])


def _encode_term(term: HamiltonianTerm) -> dict:
    out = {"matrix": encode_complex_matrix(term.matrix), "form": term.form.kind}
    if term.theta_class is not None:
        out["theta_class"] = term.theta_class
    return out


def _decode_term(data, where: str) -> HamiltonianTerm:
    _expect_keys(data, {"matrix", "form", "theta_class"}, {"matrix", "form"}, where)
    try:
        return HamiltonianTerm(
            matrix=decode_complex_matrix(data["matrix"], where),
            form=UncertaintyForm(data["form"]),
            theta_class=data.get("theta_class"),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _encode_channel(spec: UncertaintyChannelSpec) -> dict:
    out = {"kind": spec.kind, "center": spec.center}
    if spec.kind == "grid":
        out["halfwidth"] = spec.halfwidth
        out["points"] = spec.points
    elif spec.kind == "uniform":
        out["halfwidth"] = spec.halfwidth
    else:
        out["stddev"] = spec.stddev
    return out


def _decode_channel(data, where: str) -> UncertaintyChannelSpec:
    _expect_keys(data, {"kind", "center", "halfwidth", "points", "stddev"}, {"kind"}, where)
    kind = data["kind"]
    center = float(data.get("center", 1.0))
    try:
        if kind == "grid":
            return UncertaintyChannelSpec.grid(float(data["halfwidth"]), int(data["points"]), center)
        if kind == "uniform":
            return UncertaintyChannelSpec.uniform(float(data["halfwidth"]), center)
        if kind == "truncated_gaussian":
            return UncertaintyChannelSpec.truncated_gaussian(float(data["stddev"]), center)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}: unknown sampling kind {kind!r}")


def spec_to_config(spec: ExperimentSpec, seed: int = DEFAULT_SEED) -> dict:
    """Fully explicit config dict for a spec (the resolved-config snapshot)."""
    target = {"kind": "pure", "vector": encode_complex_vector(spec.target.vector)}
    if spec.target.split is not None:
        target = {
            "kind": "lifted_pure",
            "vector": encode_complex_vector(spec.target.vector),
            "atom_state": encode_complex_vector(spec.target.atom_state),
            "split": {
                "field_labels": list(spec.target.split.field_labels),
                "atom_indices": list(spec.target.split.atom_indices),
            },
        }
    return {
        "experiment": spec.id,
        "seed": int(seed),
        "grid": {"duration": spec.grid.duration, "intervals": spec.grid.intervals},
        "model": {
            "dim": spec.model.dim,
            "theta_classes": spec.model.n_theta_classes,
            "drift_terms": [_encode_term(t) for t in spec.model.drift_terms],
            "control_terms": [_encode_term(t) for t in spec.model.control_terms],
        },
        "psi0": encode_complex_vector(spec.psi0),
        "target": target,
        "initial_controls": [
            {"waveform": w.name, "amplitude": w.amplitude, "offset": w.offset}
            for w in spec.initial_waveforms
        ],
        "bounds": None if spec.bounds is None else [list(b) if b else None for b in spec.bounds],
        "train_sampling": [_encode_channel(c) for c in spec.train_sampling],
        "train_class_map": None if spec.train_class_map is None else list(spec.train_class_map),
        "test_sampling": {
            "count": spec.test_count,
            "channels": [_encode_channel(c) for c in spec.test_sampling],
        },
        "training": {
            "eta": spec.train_cfg.eta,
            "epsilon": spec.train_cfg.epsilon,
            "patience": spec.train_cfg.patience,
            "max_iter": spec.train_cfg.max_iter,
            "bounds_mode": spec.train_cfg.bounds_mode,
        },
        "physical_params": dict(spec.physical_params),
    }


def _decode_target(data, where: str) -> TargetSpec:
    _expect_keys(data, {"kind", "vector", "atom_state", "split"}, {"kind", "vector"}, where)
    vector = decode_complex_vector(data["vector"], f"{where}.vector")
    if data["kind"] == "pure":
        if "atom_state" in data or "split" in data:
            raise ConfigError(f"{where}: pure targets take no atom_state/split")
        return TargetSpec.pure(vector)
    if data["kind"] != "lifted_pure":
        raise ConfigError(f"{where}: unknown target kind {data['kind']!r}")
    _expect_keys(data["split"], {"field_labels", "atom_indices"},
                 {"field_labels", "atom_indices"}, f"{where}.split")
    split = SubsystemSplit(
        field_labels=tuple(int(x) for x in data["split"]["field_labels"]),
        atom_indices=tuple(int(x) for x in data["split"]["atom_indices"]),
    )
    atom = decode_complex_vector(data["atom_state"], f"{where}.atom_state")
    return TargetSpec.lifted_subsystem_pure(vector, atom, split)


def _decode_model(data, where: str) -> HamiltonianModel:
    _expect_keys(data, {"dim", "theta_classes", "drift_terms", "control_terms"},
                 {"dim", "control_terms"}, where)
    try:
        return HamiltonianModel(
            dim=int(data["dim"]),
            drift_terms=tuple(_decode_term(t, f"{where}.drift_terms[{i}]")
                              for i, t in enumerate(data.get("drift_terms", []))),
            control_terms=tuple(_decode_term(t, f"{where}.control_terms[{i}]")
                                for i, t in enumerate(data["control_terms"])),
            n_theta_classes=int(data.get("theta_classes", 0)),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _check_cavity_constants(params: dict) -> None:
    freq = params.get("transition_frequencies")
    if freq is not None and tuple(freq) != CAVITY_OMEGA:
        raise ConfigError("transition_frequencies are fixed model constants")
    dip = params.get("dipole_coupling")
    if dip is not None and float(dip) != CAVITY_DIPOLE:
        raise ConfigError("dipole_coupling is a fixed model constant")


def resolve(config: dict) -> tuple[ExperimentSpec, int]:
    """Validate a config dict and produce the spec plus the run seed.

    Built-in experiments supply every section the config leaves out;
    explicit sections always win over the builder's output.
    """
    _expect_keys(config, _TOP_KEYS, {"experiment"}, "config")
    exp_id = config["experiment"]
    seed = config.get("seed", DEFAULT_SEED)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")

    params = config.get("physical_params", {})
    if not isinstance(params, dict):
        raise ConfigError("physical_params must be an object")

    if exp_id in EXPERIMENT_IDS:
        allowed = _BUILDER_PARAMS[exp_id] | (
            {"transition_frequencies", "dipole_coupling"} if exp_id == "cavity" else set()
        )
        unknown = set(params) - allowed
        if unknown:
            raise ConfigError(f"physical_params: unknown keys {sorted(unknown)} for {exp_id}")
        if exp_id == "cavity":
            _check_cavity_constants(params)
        builder_args = {k: v for k, v in params.items() if k in _BUILDER_PARAMS[exp_id]}
        try:
            spec = build(exp_id, **builder_args)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None
    elif exp_id == "custom":
        for key in ("model", "grid", "psi0", "target", "initial_controls",
                    "train_sampling", "test_sampling", "training"):
            if key not in config:
                raise ConfigError(f"custom experiments must define {key!r}")
        spec = None
    else:
        raise ConfigError(f"unknown experiment {exp_id!r}")

    try:
        if "grid" in config:
            _expect_keys(config["grid"], {"duration", "intervals"},
                         {"duration", "intervals"}, "grid")
            grid = TimeGrid(duration=float(config["grid"]["duration"]),
                            intervals=int(config["grid"]["intervals"]))
        else:
            grid = spec.grid
        model = _decode_model(config["model"], "model") if "model" in config else spec.model
        psi0 = decode_complex_vector(config["psi0"], "psi0") if "psi0" in config else spec.psi0
        target = _decode_target(config["target"], "target") if "target" in config else spec.target
        if "initial_controls" in config:
            waves = []
            for i, w in enumerate(config["initial_controls"]):
                _expect_keys(w, {"waveform", "amplitude", "offset"}, {"waveform"},
                             f"initial_controls[{i}]")
                waves.append(WaveformSpec(name=w["waveform"],
                                          amplitude=float(w.get("amplitude", 1.0)),
                                          offset=float(w.get("offset", 0.0))))
            waves = tuple(waves)
        else:
            waves = spec.initial_waveforms
        if "bounds" in config:
            raw = config["bounds"]
            bounds = None if raw is None else tuple(
                None if b is None else (float(b[0]), float(b[1])) for b in raw
            )
        else:
            bounds = None if spec is None else spec.bounds
        if "train_sampling" in config:
            train_sampling = tuple(_decode_channel(c, f"train_sampling[{i}]")
                                   for i, c in enumerate(config["train_sampling"]))
        else:
            train_sampling = spec.train_sampling
        if "train_class_map" in config:
            raw_map = config["train_class_map"]
            train_class_map = None if raw_map is None else tuple(int(x) for x in raw_map)
        else:
            train_class_map = None if spec is None else spec.train_class_map
        if "test_sampling" in config:
            _expect_keys(config["test_sampling"], {"count", "channels"},
                         {"count", "channels"}, "test_sampling")
            test_count = int(config["test_sampling"]["count"])
            test_sampling = tuple(_decode_channel(c, f"test_sampling.channels[{i}]")
                                  for i, c in enumerate(config["test_sampling"]["channels"]))
        else:
            test_count = spec.test_count
            test_sampling = spec.test_sampling
        if "training" in config:
            _expect_keys(config["training"], {"eta", "epsilon", "patience", "max_iter", "bounds_mode"},
                         {"eta"}, "training")
            t = config["training"]
            train_cfg = TrainConfig(
                eta=float(t["eta"]),
                epsilon=float(t.get("epsilon", 1e-4)),
                patience=int(t.get("patience", 100)),
                max_iter=int(t.get("max_iter", 20000)),
                bounds_mode=t.get("bounds_mode", "clip"),
            )
        else:
            train_cfg = spec.train_cfg

        resolved = ExperimentSpec(
            id=exp_id,
            model=model,
            grid=grid,
            psi0=np.asarray(psi0, dtype=np.complex128),
            target=target,
            train_sampling=train_sampling,
            train_class_map=train_class_map,
            test_sampling=test_sampling,
            test_count=test_count,
            train_cfg=train_cfg,
            initial_waveforms=waves,
            bounds=bounds,
            physical_params=dict(params) if exp_id == "custom" or params else
                            (dict(spec.physical_params) if spec is not None else {}),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    return resolved, seed


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    return data


def apply_override(config: dict, assignment: str) -> None:
    """Apply one --set key=value override; the path is dotted, values are JSON."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    path, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = path.split(".")
    node = config
    for i, part in enumerate(parts[:-1]):
        key = int(part) if isinstance(node, list) else part
        try:
            nxt = node[key]
        except (KeyError, IndexError, ValueError, TypeError):
            raise ConfigError(f"override path {path!r} has no element {part!r}") from None
        node = nxt
    last = parts[-1]
    key = int(last) if isinstance(node, list) else last
    try:
        node[key] = value
    except (IndexError, ValueError, TypeError):
        raise ConfigError(f"cannot set {path!r}") from None


def specs_equal(a: ExperimentSpec, b: ExperimentSpec) -> bool:
    """Structural equality, used by the round-trip tests."""
    if (a.id, a.grid, a.train_sampling, a.train_class_map, a.test_sampling, a.test_count,
            a.train_cfg, a.initial_waveforms, a.bounds) != \
       (b.id, b.grid, b.train_sampling, b.train_class_map, b.test_sampling, b.test_count,
            b.train_cfg, b.initial_waveforms, b.bounds):
        return False
    if a.physical_params != b.physical_params:
        return False
    if not np.array_equal(a.psi0, b.psi0) or not np.array_equal(a.target.vector, b.target.vector):
        return False
    if (a.target.split is None) != (b.target.split is None):
        return False
    if a.target.split is not None and (a.target.split != b.target.split
                                       or not np.array_equal(a.target.atom_state, b.target.atom_state)):
        return False
    ma, mb = a.model, b.model
    if (ma.dim, ma.n_theta_classes) != (mb.dim, mb.n_theta_classes):
        return False
    for ta, tb in zip((*ma.drift_terms, *ma.control_terms), (*mb.drift_terms, *mb.control_terms)):
        if ta.form != tb.form or ta.theta_class != tb.theta_class:
            return False
        if not np.array_equal(ta.matrix, tb.matrix):
            return False
    return len(ma.drift_terms) == len(mb.drift_terms) and len(ma.control_terms) == len(mb.control_terms)
