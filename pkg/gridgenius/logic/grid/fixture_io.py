"""
Network fixture file IO.

This module reads and writes network descriptions as YAML documents. The
writer is canonical (fixed key order, block lists of flow mappings) so a
load/save cycle reproduces the file byte for byte.

Schema (format ``gridgenius-network``, version 1):
    name                      free text
    system.mva_base           system base, MVA
    system.frequency_hz       nominal frequency, Hz
    system.demand_range_mw    [min, max] total nominal demand, MW
    buses[]                   id, kind (Slack|PV|PQ), base_kv (kV), v_min, v_max (p.u.)
    branches[]                from, to, kind (line|transformer), r, x, b (p.u. system base), tap
    loads[]                   bus, participation (fraction), power_factor
    generators[]              bus, kind (GFM|GFL|SG|INF), rated_mva (MVA), rated_kv (kV),
                              p_min_frac, p_max_frac, dynamics (machine-base parameters)
    controls                  ordered control labels
    outputs                   ordered output labels
"""

from dataclasses import asdict
import logging
from pathlib import Path
from typing import Any, Dict, Union

import yaml

from ..models.dynamic_params import params_from_dict
from ..models.network_models import (
    Branch, Bus, BusKind, GeneratorKind, GeneratorSpec, LoadSpec,
    NetworkDataError, NetworkModel,
)

logger = logging.getLogger(__name__)

FORMAT_TAG = 'gridgenius-network'
FORMAT_VERSION = 1
FIXTURE_PATH = Path(__file__).resolve().parents[2] / 'assets' / 'ieee9_fixture.yaml'


def network_from_dict(data: Dict[str, Any]) -> NetworkModel:
    """
    Build a network model from its document representation.

    Args:
        data: Parsed fixture document

    Returns:
        NetworkModel instance (validated)
    """
    if data.get('format') != FORMAT_TAG:
        raise NetworkDataError(f"Not a network fixture (format={data.get('format')!r})")
    if data.get('version') != FORMAT_VERSION:
        raise NetworkDataError(f"Unsupported fixture version: {data.get('version')!r}")

    try:
        system = data['system']
        buses = tuple(
            Bus(
                id=int(b['id']),
                kind=BusKind(b['kind']),
                base_kv=float(b['base_kv']),
                v_min=float(b['v_min']),
                v_max=float(b['v_max']),
            )
            for b in data['buses']
        )
        branches = tuple(
            Branch(
                from_bus=int(br['from']),
                to_bus=int(br['to']),
                r=float(br['r']),
                x=float(br['x']),
                b_shunt=float(br.get('b', 0.0)),
                tap=float(br.get('tap', 1.0)),
                kind=br.get('kind', 'line'),
            )
            for br in data['branches']
        )
        loads = tuple(
            LoadSpec(
                bus=int(ld['bus']),
                participation=float(ld['participation']),
                power_factor=float(ld['power_factor']),
            )
            for ld in data.get('loads') or []
        )
        generators = []
        for g in data['generators']:
            kind = GeneratorKind(g['kind'])
            dynamics = g.get('dynamics')
            generators.append(GeneratorSpec(
                bus=int(g['bus']),
                kind=kind,
                rated_mva=float(g['rated_mva']),
                rated_kv=float(g['rated_kv']),
                p_min_frac=float(g['p_min_frac']),
                p_max_frac=float(g['p_max_frac']),
                dynamic_params=params_from_dict(kind.value, dynamics) if dynamics is not None else None,
            ))
        demand = system.get('demand_range_mw', [0.0, 0.0])
        network = NetworkModel(
            name=str(data.get('name', 'network')),
            buses=buses,
            branches=branches,
            loads=loads,
            generators=tuple(generators),
            system_mva_base=float(system['mva_base']),
            frequency_hz=float(system.get('frequency_hz', 60.0)),
            demand_range=(float(demand[0]), float(demand[1])),
            controls=tuple(data.get('controls') or ()),
            outputs=tuple(data.get('outputs') or ()),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise NetworkDataError(f"Malformed network fixture: {e}") from e

    validation = network.validate()
    if not validation.is_valid:
        raise NetworkDataError("Invalid network: " + "; ".join(validation.errors))
    for warning in validation.warnings:
        logger.warning(warning)
    return network


def network_to_dict(network: NetworkModel) -> Dict[str, Any]:
    """Canonical document representation of a network."""
    generators = []
    for g in network.generators:
        entry: Dict[str, Any] = {
            'bus': g.bus,
            'kind': g.kind.value,
            'rated_mva': g.rated_mva,
            'rated_kv': g.rated_kv,
            'p_min_frac': g.p_min_frac,
            'p_max_frac': g.p_max_frac,
        }
        if g.dynamic_params is not None:
            entry['dynamics'] = asdict(g.dynamic_params)
        generators.append(entry)

    return {
        'format': FORMAT_TAG,
        'version': FORMAT_VERSION,
        'name': network.name,
        'system': {
            'mva_base': network.system_mva_base,
            'frequency_hz': network.frequency_hz,
            'demand_range_mw': list(network.demand_range),
        },
        'buses': [
            {'id': b.id, 'kind': b.kind.value, 'base_kv': b.base_kv, 'v_min': b.v_min, 'v_max': b.v_max}
            for b in network.buses
        ],
        'branches': [
            {'from': br.from_bus, 'to': br.to_bus, 'kind': br.kind,
             'r': br.r, 'x': br.x, 'b': br.b_shunt, 'tap': br.tap}
            for br in network.branches
        ],
        'loads': [
            {'bus': ld.bus, 'participation': ld.participation, 'power_factor': ld.power_factor}
            for ld in network.loads
        ],
        'generators': generators,
        'controls': list(network.controls),
        'outputs': list(network.outputs),
    }


def load_network(path: Union[str, Path]) -> NetworkModel:
    """
    Load a network fixture file.

    Args:
        path: Path to a YAML fixture

    Returns:
        Validated NetworkModel
    """
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        raise NetworkDataError(f"Network file not found: {path}") from None
    except yaml.YAMLError as e:
        raise NetworkDataError(f"Invalid YAML in {path}: {e}") from e

    if not isinstance(data, dict):
        raise NetworkDataError(f"Network file {path} does not contain a mapping")

    network = network_from_dict(data)
    logger.debug(f"Loaded network '{network.name}' from {path} ({network.n_bus} buses)")
    return network


def save_network(network: NetworkModel, path: Union[str, Path]) -> Path:
    """Write a network fixture in canonical form."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = yaml.safe_dump(
        network_to_dict(network), sort_keys=False, default_flow_style=None, width=120
    )
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)
    return path


def ieee9_fixture() -> NetworkModel:
    """The bundled modified IEEE 9-bus network with GFM, SG and GFL units."""
    return load_network(FIXTURE_PATH)
