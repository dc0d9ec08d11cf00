from .generators import (abilene, enumerate_binary_trees, fig1_tree, fig9_fixture, full_mary_tree,
                         generate_topology, insert_degree_two, random_binary_tree, random_routed_dag,
                         star_tree, two_by_two_fixture)
from .io import read_topology, write_topology
from .logical import (FMatrix, collapse_routing, line_graph_adjacency, line_graph_from_pairs,
                      logical_collapse, topologies_equal, tree_canonical_form)
from .model import (INTERNAL, LEAF, Edge, LogicalTopology, Node, Routing, Topology,
                    dag_from_edges, routing_from_trees, tree_from_edges)
from .routing import (TwoByTwoType, all_pair_types, branching_point, classify_2x2_oracle,
                      joining_point, validate_routing)
