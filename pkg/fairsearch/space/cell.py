from typing import List, Tuple

NUM_INPUT_NODES = 2
NUM_INTERMEDIATE_NODES = 4
OUTPUT_NODE = NUM_INPUT_NODES + NUM_INTERMEDIATE_NODES


class CellSpec:
    """
    Cell DAG: nodes 0 and 1 are inputs, 2..5 intermediates, 6 the output
    (channel concatenation of the intermediates). Every intermediate
    node has one edge from each earlier node.
    """

    num_input_nodes = NUM_INPUT_NODES
    num_intermediate = NUM_INTERMEDIATE_NODES
    output_node = OUTPUT_NODE

    @staticmethod
    def edges() -> List[Tuple[int, int]]:
        return [
            (source, target)
            for target in range(
                NUM_INPUT_NODES, NUM_INPUT_NODES + NUM_INTERMEDIATE_NODES
            )
            for source in range(target)
        ]

    @classmethod
    def num_edges(cls) -> int:
        return len(cls.edges())

    @classmethod
    def incoming(cls, target: int) -> List[int]:
        """
        Edge indices ending at an intermediate node

        :param target: int - node id in [2, 5]
        :return: List[int]
        """
        return [
            index
            for index, (_, node) in enumerate(cls.edges())
            if node == target
        ]

    @staticmethod
    def intermediate_nodes() -> List[int]:
        return list(
            range(NUM_INPUT_NODES, NUM_INPUT_NODES + NUM_INTERMEDIATE_NODES)
        )


NUM_EDGES = CellSpec.num_edges()
