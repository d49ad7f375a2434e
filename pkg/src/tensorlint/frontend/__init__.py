from .ast_nodes import (
    FrontendError, LoweringError, Node, SourceSpan, SourceSyntaxError, UnsupportedConstruct,
    parse_module, structure, unparse,
)
from .lowering import ClassInfo, LoweredModule, lower_module, module_name_for

__all__ = [
    "FrontendError", "LoweringError", "Node", "SourceSpan", "SourceSyntaxError",
    "UnsupportedConstruct", "parse_module", "structure", "unparse",
    "ClassInfo", "LoweredModule", "lower_module", "module_name_for",
]
