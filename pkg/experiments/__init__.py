# experiments package
from experiments.diameter import diameter_node
from experiments.hanson_wright import hanson_wright_node
from experiments.moments import moments_node
from experiments.norm_degree import norm_degree_node
from experiments.product import product_node
from experiments.resolvent import resolvent_node
from experiments.robust import robust_node
from experiments.tail import tail_node
from experiments.xdy import xdy_node

# 实验名 → LangGraph 节点函数
EXPERIMENT_NODES = {
    "tail": tail_node,
    "diameter": diameter_node,
    "product": product_node,
    "hanson_wright": hanson_wright_node,
    "xdy": xdy_node,
    "norm_degree": norm_degree_node,
    "resolvent": resolvent_node,
    "robust": robust_node,
    "moments": moments_node,
}
