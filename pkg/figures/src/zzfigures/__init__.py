from .render import (
    FigureSpec,
    LabeledInput,
    SchemaError,
    render_accuracy_curves,
    render_all,
    render_density_comparison,
)

__all__ = [
    "FigureSpec",
    "LabeledInput",
    "SchemaError",
    "render_accuracy_curves",
    "render_all",
    "render_density_comparison",
]
