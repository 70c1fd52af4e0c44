import random

import numpy as np
import pytest
import torch

from mando.hetgraph import ENTRY_POINT, EXTERNAL_CALL, FUNCTION_NAME, INTERNAL_CALL, ContractGraphBundle, HetGraph, SourceSpan

NODE_TYPES = ["A", "B", "C", "D", "E", "F"]
EDGE_TYPES = ["NEXT", "TRUE", "FALSE"]


def random_graph(rng: random.Random, max_nodes=50, max_types=6, edge_types=EDGE_TYPES, kind="FUSED") -> HetGraph:
    g = HetGraph(kind)
    types = NODE_TYPES[: rng.randint(1, max_types)]
    n = rng.randint(0, max_nodes)
    for _ in range(n):
        g.add_node(rng.choice(types))
    if n:
        for _ in range(rng.randint(0, 2 * n)):
            u, v, t = rng.randrange(n), rng.randrange(n), rng.choice(edge_types)
            if not g.has_edge(u, v, t):
                g.add_edge(u, v, t)
    return g


def random_cfg(rng: random.Random, name: str) -> HetGraph:
    g = HetGraph("HCFG")
    g.add_node(ENTRY_POINT, SourceSpan("r.sol", 1, 1), name)
    for k in range(rng.randint(0, 8)):
        line = rng.randint(1, 40)
        g.add_node(rng.choice(["EXPRESSION", "IF", "END_IF", "RETURN"]), SourceSpan("r.sol", line, line + rng.randint(0, 2)), name)
        src = rng.randrange(k + 1)
        g.add_edge(src, k + 1, rng.choice(EDGE_TYPES))
    return g


def random_bundle(rng: random.Random) -> ContractGraphBundle:
    hcg = HetGraph("HCG")
    hcfgs, entry_of = {}, {}
    for k in range(rng.randint(0, 6)):
        name = f"C.f{k}"
        hcg.add_node(FUNCTION_NAME, None, name, name=name)
        hcfgs[name] = random_cfg(rng, name)
        entry_of[name] = 0
    for k in range(rng.randint(0, 3)):
        hcg.add_node(FUNCTION_NAME, None, None, name=f"ext.call{k}", external=True)
    n = len(hcg.nodes)
    for _ in range(rng.randint(0, 2 * n)):
        u, v = rng.randrange(n), rng.randrange(n)
        t = EXTERNAL_CALL if hcg.nodes[v].external else INTERNAL_CALL
        if not hcg.has_edge(u, v, t):
            hcg.add_edge(u, v, t)
    return ContractGraphBundle("C", hcg, hcfgs, entry_of)


@pytest.fixture
def py_rng():
    return random.Random(1234)


@pytest.fixture(autouse=True)
def _deterministic_torch():
    torch.use_deterministic_algorithms(True)
    yield


def features_for(g: HetGraph, dim: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).normal(size=(len(g.nodes), dim))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
