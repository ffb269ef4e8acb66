"""Planning and verification toolkit for PhiNet backbones on microcontrollers."""

from .graph import ArchitectureSpec, ComputationGraph, GraphConstructionError, LayerDescriptor
from .archgraph import build_phinet, expansion_factor, bottleneck_filters, serialize_graph, deserialize_graph
from .resources import ResourceReport, estimate, count_layer, closed_form_wm, closed_form_params

__version__ = "0.1.0"
