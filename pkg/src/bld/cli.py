"""Command-line entry point: ``bld <task> [flags]`` or ``python -m bld``.

Configuration precedence is flag > ``--config`` JSON file > defaults; the
seed additionally falls back to the ``BLD_SEED`` environment variable.
Metrics are JSON lines on stdout or ``--metrics``; errors are a single JSON
object on stderr with a nonzero exit status.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import formats
from .binae import BinaryAutoencoder, fit_autoencoder
from .data import CodewordDistribution, default_codewords, load_image_bits, make_codeword_dataset, read_idx
from .model import TARGETS, fit
from .nn import AdamState, DenoiserNet, warmup_steps_for
from .oracle import tv_distance
from .sampler import DEFAULT_TEMPERATURE, SampleRequest, inpaint_chain, sample_chain
from .schedule import build_schedule

TASKS = ("train-diffusion", "train-ae", "sample", "encode", "decode", "verify", "eval-tv", "inspect-schedule")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    task: str = "verify"
    schedule: str = "linear"
    steps: int = 16  # diffusion steps T
    D: int = 8
    H: int = 128
    L: int = 2
    num_classes: int = 0
    target: str = "residual"
    lr: float = 1e-4
    warmup: float = 0.0
    iters: int = 2000
    batch_size: int = 64
    lam: float = 0.1
    cond_drop_prob: float = 0.1
    temperature: float = DEFAULT_TEMPERATURE
    guidance: float = 0.0
    count: int = 16
    cls: int | None = None
    observed: str | None = None
    codewords: str | None = None
    n_data: int = 4096
    latent_dim: int = 32
    ae_hidden: int = 128
    ae_lr: float = 5e-4
    ae_loss: str = "bce"
    seed: int = 0
    data: str = "codewords"
    labels: str | None = None
    input: str | None = None
    checkpoint: str | None = None
    ae: str | None = None
    out: str | None = None
    pgm: str | None = None
    metrics: str | None = None

    def validate(self) -> "RunConfig":
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.target not in TARGETS:
            raise ConfigError(f"unknown target {self.target!r}")
        if self.steps < 1 or self.iters < 0 or self.batch_size < 1 or self.count < 1:
            raise ConfigError("steps, batch_size and count must be positive")
        if not self.temperature > 0 or self.guidance < 0:
            raise ConfigError("temperature must be > 0 and guidance >= 0")
        return self


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(name: str, raw):
    typ = FIELD_TYPES[name]
    if raw is None:
        return None
    if "int" in typ and "float" not in typ:
        return int(raw)
    if "float" in typ:
        return float(raw)
    return raw


def resolve_config(task: str, flags: dict, env=os.environ) -> RunConfig:
    values = asdict(RunConfig())
    cfg_path = flags.pop("config", None)
    from_file = {}
    if cfg_path:
        try:
            with open(cfg_path) as fh:
                from_file = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {cfg_path}: {exc}") from None
        unknown = set(from_file) - set(values)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "seed" not in flags and "seed" not in from_file and env.get("BLD_SEED"):
        values["seed"] = int(env["BLD_SEED"])
    values.update(from_file)
    values.update({k: _parse_value(k, v) for k, v in flags.items()})
    values["task"] = task
    return RunConfig(**values).validate()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields")
    for f in fields(RunConfig):
        if f.name == "task":
            continue
        flag = "--" + f.name.replace("_", "-")
        alias = ["--class"] if f.name == "cls" else []
        common.add_argument(flag, *alias, dest=f.name, default=argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="bld", description="Binary latent diffusion toolkit")
    sub = parser.add_subparsers(dest="task", required=True)
    for task in TASKS:
        sub.add_parser(task, parents=[common])
    return parser


@contextlib.contextmanager
def metrics_stream(path):
    if path:
        with open(path, "w") as fh:
            yield fh
    else:
        yield sys.stdout


def _emit(stream, record: dict):
    stream.write(json.dumps(record, sort_keys=True) + "\n")


def _codeword_dist(cfg: RunConfig) -> CodewordDistribution:
    if cfg.codewords:
        return CodewordDistribution.from_strings(cfg.codewords.split(","))
    return default_codewords()


def _diffusion_data(cfg: RunConfig, rng):
    if cfg.data == "codewords":
        dist = _codeword_dist(cfg)
        bits, labels = make_codeword_dataset(dist, cfg.n_data, rng, return_labels=True)
        return bits, (labels if cfg.num_classes else None)
    bits = formats.read_blds(cfg.data)
    labels = None
    if cfg.labels:
        labels = np.asarray(read_idx(cfg.labels).data, dtype=np.int64)
        if len(labels) != len(bits):
            raise ConfigError("label count does not match latent count")
    return bits, labels


def _net_config(cfg: RunConfig) -> dict:
    return {"schedule": cfg.schedule, "steps": cfg.steps, "D": cfg.D, "H": cfg.H, "L": cfg.L,
            "num_classes": cfg.num_classes, "target": cfg.target}


def train_diffusion(cfg: RunConfig, out) -> int:
    rng = np.random.default_rng(cfg.seed)
    data, labels = _diffusion_data(cfg, rng)
    if data.shape[1] != cfg.D:
        raise ConfigError(f"data has {data.shape[1]} bits but D={cfg.D}")
    s = build_schedule(cfg.schedule, cfg.steps)
    net = DenoiserNet(cfg.D, cfg.steps, cfg.H, cfg.L, cfg.num_classes, rng=rng)
    opt = AdamState(lr=cfg.lr, warmup_steps=warmup_steps_for(cfg.warmup, cfg.iters))
    fit(net, data, s, cfg.iters, rng, opt, cfg.batch_size, cfg.lam, cfg.cond_drop_prob,
        labels=labels, target=cfg.target, log=lambda r: _emit(out, r))
    formats.save_checkpoint(cfg.out or "diffusion.json", {**asdict(cfg), "net": _net_config(cfg)},
                            net.params, opt.to_json(), cfg.seed, opt.step)
    return 0


def load_denoiser(path):
    doc = formats.load_checkpoint(path)
    nc = doc["config"].get("net")
    if nc is None:
        raise ConfigError(f"{path} is not a diffusion checkpoint")
    net = DenoiserNet(nc["D"], nc["steps"], nc["H"], nc["L"], nc["num_classes"], zero=True)
    for k, v in doc["params"].items():
        if k not in net.params or net.params[k].shape != v.shape:
            raise ConfigError(f"checkpoint parameter {k} does not match its config")
    net.params = doc["params"]
    return net, nc


def load_autoencoder(path) -> BinaryAutoencoder:
    doc = formats.load_checkpoint(path)
    ac = doc["config"].get("autoencoder")
    if ac is None:
        raise ConfigError(f"{path} is not an autoencoder checkpoint")
    ae = BinaryAutoencoder(ac["input_dim"], ac["latent_dim"], tuple(ac["hidden"]), zero=True, loss=ac["loss"])
    ae.params = doc["params"]
    return ae


def _image_side(n: int) -> int | None:
    side = int(round(np.sqrt(n)))
    return side if side * side == n else None


def write_image_grid(images, path):
    """Square vectors are tiled as images; anything else becomes one raster row per vector."""
    images = np.asarray(images)
    side = _image_side(images.shape[1])
    if side is None:
        formats.write_pgm(images, path)
    else:
        formats.write_pgm(formats.tile(images.reshape(-1, side, side)), path)


def sample(cfg: RunConfig, out, explicit: set) -> int:
    if not cfg.checkpoint:
        raise ConfigError("sample needs --checkpoint")
    net, nc = load_denoiser(cfg.checkpoint)
    if "steps" in explicit and cfg.steps != nc["steps"]:
        raise ConfigError(f"--steps {cfg.steps} does not match checkpoint T={nc['steps']}")
    s = build_schedule(nc["schedule"], nc["steps"])
    mask = observed = None
    if cfg.observed:
        if len(cfg.observed) != net.D:
            raise ConfigError(f"--observed has {len(cfg.observed)} symbols, latent has {net.D}")
        mask = np.array([c in "01" for c in cfg.observed])
        observed = np.array([int(c) if c in "01" else 0 for c in cfg.observed], dtype=np.uint8)
    req = SampleRequest(cfg.count, cfg.temperature, cfg.guidance, cfg.cls, mask, observed,
                        seed=cfg.seed, target=nc["target"])
    z, _ = (inpaint_chain if mask is not None else sample_chain)(net, req, s)
    path = cfg.out or "samples.blds"
    formats.write_blds(path, z)
    if cfg.pgm:
        write_image_grid(load_autoencoder(cfg.ae).decode(z) if cfg.ae else z, cfg.pgm)
    _emit(out, {"samples": int(len(z)), "D": int(net.D), "out": path, "pgm": cfg.pgm})
    return 0


def train_ae(cfg: RunConfig, out) -> int:
    rng = np.random.default_rng(cfg.seed)
    source = "digits" if cfg.data == "codewords" else cfg.data
    x = load_image_bits(source, rng)
    ae = BinaryAutoencoder(x.shape[1], cfg.latent_dim, (cfg.ae_hidden,), rng=rng, loss=cfg.ae_loss)
    opt = AdamState(lr=cfg.ae_lr, warmup_steps=warmup_steps_for(cfg.warmup, cfg.iters))
    fit_autoencoder(ae, x, cfg.iters, rng, opt, cfg.batch_size, log=lambda r: _emit(out, r))
    formats.save_checkpoint(cfg.out or "autoencoder.json", {**asdict(cfg), "autoencoder": ae.config()},
                            ae.params, opt.to_json(), cfg.seed, opt.step)
    return 0


def encode(cfg: RunConfig, out) -> int:
    if not cfg.ae:
        raise ConfigError("encode needs --ae")
    ae = load_autoencoder(cfg.ae)
    rng = np.random.default_rng(cfg.seed)
    x = load_image_bits(cfg.input or "digits", rng)
    _, z = ae.encode(x, rng)
    path = cfg.out or "latents.blds"
    formats.write_blds(path, z)
    _emit(out, {"encoded": int(len(z)), "latent_dim": ae.latent_dim, "out": path})
    return 0


def decode(cfg: RunConfig, out) -> int:
    if not cfg.ae or not cfg.input:
        raise ConfigError("decode needs --ae and --input")
    ae = load_autoencoder(cfg.ae)
    z = formats.read_blds(cfg.input)
    if z.shape[1] != ae.latent_dim:
        raise ConfigError(f"latents have {z.shape[1]} bits, autoencoder expects {ae.latent_dim}")
    path = cfg.pgm or cfg.out or "decoded.pgm"
    write_image_grid(ae.decode(z), path)
    _emit(out, {"decoded": int(len(z)), "pgm": path})
    return 0


def verify(cfg: RunConfig, out) -> int:
    from .verify import run_checks

    checks = run_checks()
    for c in checks:
        out.write(c.row() + "\n")
    ok = all(c.passed for c in checks)
    out.write(f"{sum(c.passed for c in checks)}/{len(checks)} checks passed\n")
    return 0 if ok else 1


def eval_tv(cfg: RunConfig, out) -> int:
    if not cfg.input:
        raise ConfigError("eval-tv needs --input")
    z = formats.read_blds(cfg.input)
    dist = _codeword_dist(cfg)
    if z.shape[1] != dist.d:
        raise ConfigError(f"samples have {z.shape[1]} bits, target has {dist.d}")
    _emit(out, {"tv": tv_distance(z, dist.table()), "outside_mass": dist.outside_mass(z), "n": int(len(z))})
    return 0


def inspect_schedule(cfg: RunConfig, out) -> int:
    csv = build_schedule(cfg.schedule, cfg.steps).to_csv()
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(csv)
    else:
        out.write(csv)
    return 0


def run(cfg: RunConfig, explicit: set = frozenset()) -> int:
    with metrics_stream(cfg.metrics) as out:
        if cfg.task in ("train-diffusion", "train-ae"):
            _emit(out, {"config": asdict(cfg)})
        if cfg.task == "train-diffusion":
            return train_diffusion(cfg, out)
        if cfg.task == "train-ae":
            return train_ae(cfg, out)
        if cfg.task == "sample":
            return sample(cfg, out, explicit)
        if cfg.task == "encode":
            return encode(cfg, out)
        if cfg.task == "decode":
            return decode(cfg, out)
        if cfg.task == "verify":
            return verify(cfg, out)
        if cfg.task == "eval-tv":
            return eval_tv(cfg, out)
        return inspect_schedule(cfg, out)


def main(argv=None) -> int:
    parser = build_parser()
    ns = vars(parser.parse_args(argv))
    task = ns.pop("task")
    try:
        explicit = set(ns) - {"config"}
        cfg = resolve_config(task, ns)
        return run(cfg, explicit)
    except (ConfigError, formats.FormatError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2
    except (OSError, ValueError, KeyError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
