from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from .errors import ConfigError, DomainError
from .models import DEFAULT_AVAILABILITY_TARGET, ClusterState, NodeSpec
from .utils import gb_to_bytes, mb_to_bytes

try:
    import yaml
except ImportError as exc:  # pragma: no cover
    raise RuntimeError("PyYAML is required to load configuration files.") from exc

WEIGHT_MODES = ("free", "capacity")


@dataclass
class PlacementSettings:
    weight_mode: str = "free"
    max_replicas: Optional[int] = None
    accept_clamped: bool = False

    def __post_init__(self) -> None:
        self.weight_mode = str(self.weight_mode).lower()
        if self.weight_mode not in WEIGHT_MODES:
            raise ConfigError(f"placement.weight_mode: expected one of {WEIGHT_MODES}, got {self.weight_mode!r}")
        if self.max_replicas is not None and int(self.max_replicas) < 1:
            raise ConfigError("placement.max_replicas: must be >= 1")


@dataclass
class ReliabilitySettings:
    montecarlo_workers: int = 1
    chunk_size: int = 50_000
    blocks_per_node: float = 1280
    assumed_avg_replicas: float = 3


@dataclass
class OutputSettings:
    probability_decimals: int = 4


@dataclass
class LoggingSettings:
    level: str = "info"


@dataclass
class Settings:
    placement: PlacementSettings = field(default_factory=PlacementSettings)
    reliability: ReliabilitySettings = field(default_factory=ReliabilitySettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    logging: LoggingSettings = field(default_factory=LoggingSettings)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "Settings":
        payload = data or {}
        if not isinstance(payload, Mapping):
            raise ConfigError("settings: expected a mapping at the top level")
        try:
            return cls(
                placement=PlacementSettings(**(payload.get("placement") or {})),
                reliability=ReliabilitySettings(**(payload.get("reliability") or {})),
                output=OutputSettings(**(payload.get("output") or {})),
                logging=LoggingSettings(**(payload.get("logging") or {})),
            )
        except TypeError as exc:
            raise ConfigError(f"settings: {exc}") from exc

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"
DEFAULT_CONFIG_PATH = CONFIG_DIR / "settings.yaml"
EXAMPLE_CONFIG_PATH = CONFIG_DIR / "settings.example.yaml"


def load_settings(config_path: Optional[str | Path] = None) -> Settings:
    path = Path(config_path) if config_path else DEFAULT_CONFIG_PATH
    if not path.exists():
        path = EXAMPLE_CONFIG_PATH
    if not path.exists():
        return Settings()
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    return Settings.from_dict(data)


# ---- JSON inputs ----------------------------------------------------


def read_json(path: str | Path) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror or exc})") from exc
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not UTF-8 text (byte {exc.start})") from exc
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}") from exc
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _reject_constant(name: str) -> Any:
    raise ConfigError(f"non-finite number {name} is not allowed")


def _number(obj: Mapping[str, Any], key: str, where: str, default: Any = None) -> float:
    if key not in obj:
        if default is None:
            raise ConfigError(f"{where}: missing key '{key}'")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {type(value).__name__}")
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"{where}.{key}: expected a finite number, got {value}")
    return value


@dataclass(frozen=True)
class ClusterConfig:
    """
    Parsed cluster config: {"block_size_mb", "availability_target", "nodes": [...]}.
    """

    nodes: List[NodeSpec]
    block_size_bytes: int
    availability_target: float = DEFAULT_AVAILABILITY_TARGET

    @classmethod
    def from_dict(cls, data: Any) -> "ClusterConfig":
        if not isinstance(data, Mapping):
            raise ConfigError("cluster: expected a JSON object")
        block_size_mb = _number(data, "block_size_mb", "cluster", default=64)
        alpha = _number(data, "availability_target", "cluster", default=DEFAULT_AVAILABILITY_TARGET)
        if "nodes" not in data:
            raise ConfigError("cluster: missing key 'nodes'")
        raw_nodes = data["nodes"]
        if not isinstance(raw_nodes, list) or not raw_nodes:
            raise ConfigError("cluster.nodes: expected a non-empty list")

        specs: List[NodeSpec] = []
        seen = set()
        for idx, raw in enumerate(raw_nodes):
            where = f"nodes[{idx}]"
            if not isinstance(raw, Mapping):
                raise ConfigError(f"{where}: expected an object")
            nid = raw.get("id")
            if isinstance(nid, bool) or not isinstance(nid, int):
                raise ConfigError(f"{where}.id: expected an integer")
            if nid in seen:
                raise ConfigError(f"{where}.id: duplicate node id {nid}")
            seen.add(nid)
            label = raw.get("label")
            if label is not None and not isinstance(label, str):
                raise ConfigError(f"{where}.label: expected a string")
            try:
                specs.append(
                    NodeSpec(
                        id=nid,
                        capacity_bytes=gb_to_bytes(_number(raw, "capacity_gb", where)),
                        failure_probability=float(_number(raw, "failure_probability", where)),
                        label=label,
                    )
                )
            except DomainError as exc:
                raise ConfigError(f"{where}: {exc}") from exc

        if block_size_mb <= 0:
            raise ConfigError("cluster.block_size_mb: must be > 0")
        if not 0.0 <= alpha < 1.0:
            raise ConfigError("cluster.availability_target: must lie in [0, 1)")
        return cls(nodes=specs, block_size_bytes=mb_to_bytes(block_size_mb), availability_target=float(alpha))

    def to_state(self) -> ClusterState:
        return ClusterState.build(self.nodes, self.block_size_bytes, self.availability_target)

    def with_failure_probability(self, node_id: int, value: float) -> "ClusterConfig":
        if all(spec.id != node_id for spec in self.nodes):
            raise DomainError(f"unknown node {node_id}")
        nodes = [
            NodeSpec(spec.id, spec.capacity_bytes, value, spec.label) if spec.id == node_id else spec
            for spec in self.nodes
        ]
        return ClusterConfig(nodes=nodes, block_size_bytes=self.block_size_bytes, availability_target=self.availability_target)


def load_cluster_config(path: str | Path) -> ClusterConfig:
    return ClusterConfig.from_dict(read_json(path))
