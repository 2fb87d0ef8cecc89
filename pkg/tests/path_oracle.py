"""Reachability in the space-time graph of a timeline, used as an independent check of active paths."""
from typing import Iterable, Optional

import networkx as nx

from wedgecp.regions import FullSpace, Region
from wedgecp.substrate import EventTimeline


def path_graph(timeline: EventTimeline, region: Optional[Region] = None) -> nx.DiGraph:
    """Vertical edges join consecutive event times of a site when no death mark falls in between; each arrow is an
    edge. Edges leaving `region` are left out.
    """
    region = region or FullSpace()
    graph = nx.DiGraph()
    times_at = {x: {0.0, timeline.horizon} for x in range(timeline.x_min, timeline.x_max + 1)}
    for (x, y), times in timeline.arrows.items():
        for t in times.tolist():
            times_at[x].add(t)
            times_at[y].add(t)
            if region.contains(x, t) and region.contains(y, t):
                graph.add_edge((x, t), (y, t))
    for x, times in times_at.items():
        ordered = sorted(times)
        deaths = timeline.deaths.get(x, [])
        graph.add_nodes_from((x, t) for t in ordered)
        for a, b in zip(ordered, ordered[1:]):
            if not region.contains(x, a) or not region.contains(x, b):
                continue
            if not any(a < death <= b for death in deaths):
                graph.add_edge((x, a), (x, b))
    return graph


def has_path(graph: nx.DiGraph, source, target) -> bool:
    return graph.has_node(source) and graph.has_node(target) and nx.has_path(graph, source, target)


def reached_sites(timeline: EventTimeline, sources: Iterable[int], region: Optional[Region] = None) -> set[int]:
    """Sites y with a graph path from some (x, 0), x in `sources`, to (y, horizon)."""
    graph = path_graph(timeline, region)
    sources = list(sources)
    return {y for y in range(timeline.x_min, timeline.x_max + 1)
            if any(has_path(graph, (x, 0.0), (y, timeline.horizon)) for x in sources)}
