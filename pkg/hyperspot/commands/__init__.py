"""The commands which provide the functionality to the command line."""
from matplotlib import pyplot as plt

# Light theme for the surveillance plots and heatmaps written to the run directories
text_color = "#222222"
line_color = "#444444"

plt.rcParams.update(
    {
        "figure.facecolor": "white",
        "axes.facecolor": "white",
        "axes.labelcolor": text_color,
        "axes.edgecolor": line_color,
        "text.color": text_color,
        "xtick.color": line_color,
        "ytick.color": line_color,
        "grid.color": line_color,
        "grid.alpha": 0.3,
        "figure.dpi": 200.0,
        # Fixed ids so the same run writes a byte-identical SVG
        "svg.hashsalt": "hyperspot",
    }
)
