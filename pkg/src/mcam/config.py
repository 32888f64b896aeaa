"""Configuration objects shared by the pipeline stages."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

from .exceptions import McamError

DEFAULT_FEATURES = ("csh", "hog", "bcov")


@dataclass(frozen=True)
class MetricConfig:
    """Parameters of the combined similarity.

    ``a`` caps the covariance influence, ``b`` sets how fast that cap grows
    with track length, ``delta`` is the ridge weight of the collaborative
    coding, and ``w_res``/``w_code`` combine the normalized residual and
    coding-norm parts.
    """

    a: float = 0.33
    b: float = 100.0
    delta: float = 1.0
    w_res: float = 0.55
    w_code: float = 0.45
    kernel_range_factor: float = 0.33
    eps_guard: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise McamError(f"a must lie in (0, 1), got {self.a}")
        if self.b <= 0:
            raise McamError(f"b must be positive, got {self.b}")
        if self.delta <= 0:
            raise McamError(f"delta must be positive, got {self.delta}")
        if abs(self.w_res + self.w_code - 1.0) > 1e-12:
            raise McamError("w_res + w_code must equal 1")
        if self.kernel_range_factor <= 0 or self.eps_guard <= 0:
            raise McamError("kernel_range_factor and eps_guard must be positive")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything that determines signature bytes and similarity values."""

    features: tuple = DEFAULT_FEATURES
    width: int = 64
    height: int = 192
    region_width: int = 32
    region_height: int = 32
    stride: int = 16
    seed: int = 0
    eps_var: float = 1e-6
    k_max_floor: int = 5
    k_max_fraction: float = 0.1
    max_iter: int = 10
    metric: MetricConfig = field(default_factory=MetricConfig)

    def __post_init__(self):
        from .features import parse_channels

        object.__setattr__(self, "features", tuple(c.value for c in parse_channels(self.features)))
        if self.seed < 0:
            raise McamError("seed must be non-negative")

    def layout(self):
        from .imaging import build_region_layout

        return build_region_layout(
            self.width, self.height, self.region_width, self.region_height, self.stride
        )

    def signature_hash(self):
        """Digest of the settings that affect signature content."""
        d = asdict(self)
        d.pop("metric")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_overrides(self, overrides):
        """Return a copy with flat ``key -> value`` overrides applied.

        Metric keys (``a``, ``b``, ``delta``...) are routed to the nested
        :class:`MetricConfig`; unknown keys raise.
        """
        top, metric = {}, {}
        top_fields = set(self.__dataclass_fields__) - {"metric"}
        metric_fields = set(MetricConfig.__dataclass_fields__)
        for key, value in overrides.items():
            if key in top_fields:
                top[key] = _coerce(self.__dataclass_fields__[key].type, value)
            elif key in metric_fields:
                metric[key] = float(value)
            else:
                raise McamError(f"unknown configuration key {key!r}")
        cfg = replace(self, **top)
        if metric:
            cfg = replace(cfg, metric=replace(cfg.metric, **metric))
        return cfg


def _coerce(type_name, value):
    if not isinstance(value, str):
        return value
    if type_name == "tuple":
        return tuple(v.strip() for v in value.split(",") if v.strip())
    if type_name == "int":
        return int(value)
    if type_name == "float":
        return float(value)
    return value
