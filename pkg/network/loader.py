import json
import logging
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from core.exceptions import CaseFileError

from .serializers import CaseFileSerializer

logger = logging.getLogger('harness')


def load_case(path):
    """
    Reads, validates and converts a case file to a per-unit MeshedGrid.

    Raises CaseFileError whose `detail` locates every problem found.
    """
    path = Path(path)
    if not path.is_file():
        raise CaseFileError({'path': [f"Case file '{path}' does not exist."]}, path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CaseFileError({'non_field_errors': [f"Invalid JSON at line {exc.lineno}: {exc.msg}."]}, path)
    grid = parse_case(data, path)
    logger.info(f"Loaded case '{grid.name}' from {path}: {len(grid.region_ids)} regions, {len(grid.tie_lines)} tie-lines.")
    return grid


def parse_case(data, path=None):
    serializer = CaseFileSerializer(data=data)
    if not serializer.is_valid():
        raise CaseFileError(serializer.errors, path)
    grid = serializer.save()
    findings = validate(grid)
    if findings:
        raise CaseFileError({location: [message] for location, message in findings}, path)
    return grid


def _connected(node_ids, edges):
    if len(node_ids) <= 1:
        return True
    index = {node: i for i, node in enumerate(node_ids)}
    rows = [index[a] for a, _ in edges]
    cols = [index[b] for _, b in edges]
    graph = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(index), len(index)))
    count, _ = connected_components(graph, directed=False)
    return count == 1


def validate(grid):
    """
    Checks the structural invariants of a MeshedGrid.

    Returns a list of (location, message) findings; empty when consistent.
    """
    findings = []
    for region in grid.ac_regions:
        where = f"ac_regions.{region.id}"
        bus_ids = region.bus_ids
        if len(set(bus_ids)) != len(bus_ids):
            findings.append((f"{where}.buses", "Duplicate bus ids."))
        slacks = [bus.id for bus in region.buses if bus.is_slack]
        if len(slacks) != 1:
            findings.append((f"{where}.buses", f"Expected one slack bus, found {len(slacks)}."))
        for bus in region.buses:
            if bus.v_min > bus.v_max:
                findings.append((f"{where}.buses.{bus.id}", "v_min exceeds v_max."))
        for gen in region.generators:
            if gen.bus not in bus_ids:
                findings.append((f"{where}.generators.{gen.id}", f"Unknown bus {gen.bus}."))
            if gen.p_min > gen.p_max or gen.q_min > gen.q_max:
                findings.append((f"{where}.generators.{gen.id}", "Inverted generator limits."))
            if gen.c1 < 0:
                findings.append((f"{where}.generators.{gen.id}", "Negative quadratic cost."))
        for branch in region.branches:
            if branch.from_bus not in bus_ids or branch.to_bus not in bus_ids:
                findings.append((f"{where}.branches.{branch.id}", "Dangling branch end."))
            if branch.r ** 2 + branch.x ** 2 == 0:
                findings.append((f"{where}.branches.{branch.id}", "Zero series impedance."))
            if branch.s_max is not None and branch.s_max <= 0:
                findings.append((f"{where}.branches.{branch.id}", "Non-positive flow limit."))
        edges = [(b.from_bus, b.to_bus) for b in region.branches if b.from_bus in bus_ids and b.to_bus in bus_ids]
        if not _connected(bus_ids, edges):
            findings.append((where, "AC region is not connected."))

    mtdc = grid.mtdc
    dc_ids = [bus.id for bus in mtdc.dc_buses]
    if mtdc.dc_buses and sum(bus.is_reference for bus in mtdc.dc_buses) != 1:
        findings.append(("mtdc.dc_buses", "Expected one reference DC bus."))
    for branch in mtdc.dc_branches:
        if branch.r <= 0 or branch.p_max <= 0:
            findings.append((f"mtdc.dc_branches.{branch.id}", "Non-positive resistance or limit."))
    dc_edges = [(b.from_bus, b.to_bus) for b in mtdc.dc_branches if b.from_bus in dc_ids and b.to_bus in dc_ids]
    if not _connected(dc_ids, dc_edges):
        findings.append(("mtdc", "DC grid is not connected."))
    for station in mtdc.stations:
        where = f"mtdc.stations.{station.id}"
        if station.dc_bus not in dc_ids:
            findings.append((where, f"Unknown DC bus {station.dc_bus}."))
        if station.a1 <= 0 or station.a3 < 0 or station.delta <= 0 or station.i_max <= 0:
            findings.append((where, "Invalid converter parameters."))
        if not 0 < station.gamma <= 1:
            findings.append((where, "Reactive constant outside (0, 1]."))
        linked = [tie for tie in grid.tie_lines if tie.station == station.id]
        if len(linked) != 1:
            findings.append((where, f"Expected one tie-line, found {len(linked)}."))

    region_ids = {region.id: region for region in grid.ac_regions}
    for tie in grid.tie_lines:
        region = region_ids.get(tie.ac_region)
        if region is None or tie.ac_bus not in region.bus_ids:
            findings.append((f"tie_lines.{tie.id}", "Dangling AC endpoint."))
    return findings
