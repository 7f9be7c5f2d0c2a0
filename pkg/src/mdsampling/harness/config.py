"""Experiment configuration and its ``key = value`` file format."""
import ast
import configparser
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..neural.ppo import PPOConfig
from ..rl_env import TEXT_CONSISTENT
from ..synth_channel import DEFAULT_TC, DEFAULT_W, GeneratorParams, NoiseSpec
from ..traffic import AS_PRINTED, TrafficModel

METHODS = ("ppo", "mcsfs", "rmcrs", "random")


@dataclass
class ExperimentConfig:
    W: int = DEFAULT_W
    M: int = 8
    b: float = 4.0
    d: float = 1.0
    omega: int = 8
    T_c: float = DEFAULT_TC
    Q: int = 3
    snr_db: float = 20.0
    on_grid: bool = False
    drift_rate: float = 2.0
    amp_jitter: float = 0.05
    phase_jitter: float = 0.1
    freq_span: float = 1.0
    train_episodes: int = 5000
    train_sequence_length: int = 250
    test_sequences: int = 10
    test_windows: int = 250
    iht_tol: float = 1e-6
    iht_max_iter: int = 200
    iht_step: str = "normalized"
    rmcrs_candidates: int = 100
    reward_sign: str = TEXT_CONSISTENT
    burst_convention: str = AS_PRINTED
    greedy_eval: bool = True
    seed: int = 0
    log_interval: int = 100
    checkpoint_interval: int = 1000
    methods: tuple = METHODS
    out_dir: str = "runs"
    ppo: PPOConfig = field(default_factory=PPOConfig)

    def traffic_model(self):
        return TrafficModel(self.W, self.b, self.d, self.burst_convention)

    def generator_params(self):
        return GeneratorParams(
            on_grid=self.on_grid, drift_rate=self.drift_rate, amp_jitter=self.amp_jitter,
            phase_jitter=self.phase_jitter, freq_span=self.freq_span,
        )

    def noise(self):
        return NoiseSpec(self.snr_db)

    @property
    def tag(self):
        return f"M{self.M}_b{self.b:g}_d{self.d:g}"

    def to_dict(self):
        d = asdict(self)
        d["methods"] = list(self.methods)
        return d


_PPO_FIELDS = {f.name for f in fields(PPOConfig)}
_TOP_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _coerce(raw):
    raw = raw.strip()
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    if raw.lower() in ("inf", "+inf", "-inf"):
        return float(raw)
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw.strip("\"'")


def apply_overrides(cfg, values):
    """Return a copy of ``cfg`` with ``values`` applied (``ppo.*`` or bare PPO keys allowed)."""
    top, ppo = {}, {}
    for key, val in values.items():
        key = key.strip()
        if key.startswith("ppo."):
            key = key[4:]
            target = ppo
        elif key in _TOP_FIELDS:
            target = top
        elif key in _PPO_FIELDS:
            target = ppo
        else:
            raise KeyError(f"unknown configuration key {key!r}")
        if key == "methods" and isinstance(val, str):
            val = tuple(m.strip() for m in val.split(",") if m.strip())
        target[key] = val
    if "methods" in top:
        bad = set(top["methods"]) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods: {sorted(bad)}")
        top["methods"] = tuple(top["methods"])
    for key, val in top.items():
        if key in ("W", "M", "omega", "Q", "seed") and isinstance(val, float) and val.is_integer():
            top[key] = int(val)
    return replace(cfg, ppo=replace(cfg.ppo, **ppo), **top)


def load_config(path, base=None):
    """Read a ``key = value`` file; an optional ``[section]`` header is ignored."""
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    if not text.lstrip().startswith("["):
        text = "[config]\n" + text
    parser.read_string(text)
    values = {}
    for section in parser.sections():
        prefix = "ppo." if section == "ppo" else ""
        for key, raw in parser.items(section):
            values[prefix + key] = _coerce(raw)
    return apply_overrides(base or ExperimentConfig(), values)


def reference_grid(M, base=None):
    """The nine (b, d) traffic settings per sample budget M."""
    base = base or ExperimentConfig()
    return [
        replace(base, M=M, b=b, d=d)
        for b in (M / 2, M, 2 * M)
        for d in (M / 8, M / 4, M / 2)
    ]
