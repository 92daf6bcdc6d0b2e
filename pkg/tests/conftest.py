import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from biplink.graph import BipartiteGraph
from biplink.synthetic import toy_graph

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def bipartite_graphs(draw, max_users=9, max_repos=7, min_edges=0):
    nu = draw(st.integers(1, max_users))
    nr = draw(st.integers(1, max_repos))
    cells = draw(st.lists(st.booleans(), min_size=nu * nr, max_size=nu * nr))
    mask = np.array(cells, dtype=bool).reshape(nu, nr)
    edges = np.argwhere(mask)
    if len(edges) < min_edges:
        edges = np.argwhere(np.ones((nu, nr), dtype=bool))[:min_edges]
    return BipartiteGraph(nu, nr, edges)


@pytest.fixture
def toy():
    return toy_graph()
