# bpire/storage.py
import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pydantic
import scipy
import yaml
from pydantic import BaseModel, ValidationError

from exceptions import ConfigError
from schemas import ArtifactMeta, ExperimentConfig, KernelSeries, SurvivalCurve
from settings import APP_NAME, APP_VERSION

logger = logging.getLogger(__name__)


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       Config files
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

def _node_line(root: Optional[yaml.Node], loc: Sequence[Union[str, int]]) -> Optional[int]:
    """1-based line of the deepest YAML node reachable along a validation error location."""
    node = root
    line = node.start_mark.line + 1 if node is not None else None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            match = next((v for k, v in node.value if k.value == key), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            match = node.value[key]
        else:
            match = None
        if match is None:
            # union branches add tags like "EnvSpec" to the location; skip them
            continue
        node = match
        line = node.start_mark.line + 1
    return line


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ConfigError(f"{where}: invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}:1: the config must be a mapping")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        messages = []
        for error in exc.errors():
            line = _node_line(root, error["loc"])
            field = ".".join(str(part) for part in error["loc"])
            messages.append(f"{source}:{line}: {field}: {error['msg']}")
        raise ConfigError("invalid config\n" + "\n".join(messages), messages=messages) from exc


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path))


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       Artifact provenance
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

def versions() -> Dict[str, str]:
    return {APP_NAME: APP_VERSION, "numpy": np.__version__, "scipy": scipy.__version__, "pydantic": pydantic.VERSION}


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def make_meta(config: ExperimentConfig, seed: int, workers: int) -> ArtifactMeta:
    return ArtifactMeta(config_hash=config_hash(config), seed=seed, workers=workers, versions=versions())


def _as_data(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode="json")
    if isinstance(obj, list):
        return [_as_data(item) for item in obj]
    return obj


def write_json(path: Union[str, Path], obj: Any, meta: ArtifactMeta) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"meta": meta.model_dump(mode="json"), "result": _as_data(obj)}
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    logger.info("wrote %s", path)
    return path


def read_json(path: Union[str, Path]) -> Dict[str, Any]:
    return json.loads(Path(path).read_text())


def _meta_lines(meta: ArtifactMeta) -> List[str]:
    lines = [f"# config_hash={meta.config_hash}", f"# seed={meta.seed}", f"# workers={meta.workers}"]
    lines += [f"# version.{name}={version}" for name, version in sorted(meta.versions.items())]
    return lines


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Any]], meta: ArtifactMeta) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        for line in _meta_lines(meta):
            handle.write(line + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    logger.info("wrote %s", path)
    return path


def write_kernel_csv(path, series: KernelSeries, meta: ArtifactMeta) -> Path:
    star = {e.n: e for e in series.Hstar}
    rows = []
    for entry in series.H:
        s = star.get(entry.n)
        rows.append(
            [entry.n, entry.value, entry.se, s.value if s else "", s.se if s else "", entry.method]
        )
    return write_csv(path, ["n", "H", "H_se", "Hstar", "Hstar_se", "method"], rows, meta)


def write_survival_csv(path, curve: SurvivalCurve, meta: ArtifactMeta) -> Path:
    rows = [[p.n, p.value, p.half_width, p.provenance] for p in curve.points]
    return write_csv(path, ["n", "R", "half_width", "provenance"], rows, meta)


def write_samples_csv(path, zeta: np.ndarray, censored: np.ndarray, peak: np.ndarray, meta: ArtifactMeta) -> Path:
    return write_csv(path, ["zeta", "censored", "peak"], zip(zeta.tolist(), censored.tolist(), peak.tolist()), meta)
