"""Small builders shared by the test modules."""
from src.query_dag import dag_from_dict


def wire(root, *nodes):
    """Short-hand dag documents: wire("r", ("a", "term", "a"), ("r", "not", ["a"]))."""
    specs = []
    for node in nodes:
        node_id, kind, arg = node if len(node) == 3 else (*node, None)
        spec = {"id": node_id, "kind": kind}
        if kind == "term":
            spec["term"] = arg
        elif arg:
            spec["children"] = list(arg)
        specs.append(spec)
    return {"root": root, "nodes": specs}


def make_dag(root, *nodes):
    return dag_from_dict(wire(root, *nodes))
