"""
Visualization Functions for Training and Evaluation Results
Generates static PNG charts: training curves, ablation and edit-reduction bars
"""

import matplotlib
matplotlib.use('Agg')  # Use non-interactive backend for saving files
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import seaborn as sns
from pathlib import Path
from typing import Dict, Optional

import config


# Set style for all plots
plt.style.use('seaborn-v0_8-whitegrid')
sns.set_palette("husl")

# Color scheme for systems / edit operations
SYSTEM_COLORS = {
    'raw MT': '#e74c3c',
    'mt_to_pe': '#f39c12',
    'concat_src_mt': '#9b59b6',
    'src_to_pe': '#3498db',
    'transference': '#2ecc71'
}
OPERATION_COLORS = {'In': '#3498db', 'De': '#e74c3c', 'Su': '#f39c12', 'Sh': '#2ecc71'}


def _annotate_bars(ax, bars, fmt: str = '{:.2f}'):
    for bar in bars:
        height = bar.get_height()
        if np.isnan(height):
            continue
        ax.annotate(fmt.format(height),
                    xy=(bar.get_x() + bar.get_width() / 2, height),
                    xytext=(0, 3 if height >= 0 else -12), textcoords="offset points",
                    ha='center', va='bottom', fontsize=9)


def create_training_curves(metric_log: pd.DataFrame, output_path: Path,
                           title: str = "Training Progress") -> str:
    """
    Train / dev loss and dev BLEU against the step.

    Args:
        metric_log: frame with step, train_loss, dev_loss, dev_bleu columns
        output_path: directory to save the figure
        title: chart title

    Returns:
        Path to saved figure
    """
    fig, (loss_ax, bleu_ax) = plt.subplots(1, 2, figsize=(14, 5))

    train = metric_log.dropna(subset=['train_loss'])
    loss_ax.plot(train['step'], train['train_loss'], 'o-', label='train loss', color='#3498db')
    dev = metric_log.dropna(subset=['dev_loss'])
    loss_ax.plot(dev['step'], dev['dev_loss'], 's--', label='dev loss', color='#e74c3c')
    loss_ax.set_xlabel('Step', fontsize=12)
    loss_ax.set_ylabel('Cross-entropy per token', fontsize=12)
    loss_ax.legend(loc='upper right')

    bleu = metric_log.dropna(subset=['dev_bleu'])
    bleu_ax.plot(bleu['step'], bleu['dev_bleu'], 'o-', color='#2ecc71')
    bleu_ax.set_xlabel('Step', fontsize=12)
    bleu_ax.set_ylabel('Dev BLEU', fontsize=12)
    bleu_ax.set_ylim(0, 100)

    fig.suptitle(title, fontsize=14, fontweight='bold')
    plt.tight_layout()
    filepath = output_path / "training_curves.png"
    plt.savefig(filepath, dpi=150, bbox_inches='tight')
    plt.close()

    return str(filepath)


def create_ablation_bar_chart(table: pd.DataFrame, output_path: Path,
                              label_column: Optional[str] = None,
                              title: str = "Layer Ablation",
                              filename: str = "ablation_study.png") -> str:
    """
    Grouped BLEU / TER bars, one group per configuration row.

    Args:
        table: ablation or architecture-comparison frame
        output_path: directory to save the figure
        label_column: column naming each row (defaults to the first column)
        title: chart title
        filename: PNG name inside output_path

    Returns:
        Path to saved figure
    """
    label_column = label_column or table.columns[0]
    labels = list(table[label_column])
    x = np.arange(len(labels))
    width = 0.35

    fig, ax = plt.subplots(figsize=(max(8, 2 * len(labels)), 6))
    colors = [SYSTEM_COLORS.get(label, '#95a5a6') for label in labels]
    bleu_bars = ax.bar(x - width / 2, table['BLEU'], width, label='BLEU', color=colors, alpha=0.8)
    ter_bars = ax.bar(x + width / 2, table['TER'], width, label='TER', color=colors,
                      alpha=0.5, hatch='//')

    ax.set_xlabel(label_column, fontsize=12)
    ax.set_ylabel('Score', fontsize=12)
    ax.set_title(title, fontsize=14, fontweight='bold')
    ax.set_xticks(x)
    ax.set_xticklabels(labels, fontsize=10)
    ax.legend(loc='upper right')
    _annotate_bars(ax, bleu_bars)
    _annotate_bars(ax, ter_bars)

    plt.tight_layout()
    filepath = output_path / filename
    plt.savefig(filepath, dpi=150, bbox_inches='tight')
    plt.close()

    return str(filepath)


def create_edit_reduction_chart(report: pd.DataFrame, output_path: Path,
                                title: str = "Edit Reduction vs. Raw MT") -> str:
    """Percent reduction per edit operation, grouped by system"""
    operations = [f"%{op}" for op in config.EDIT_OPERATIONS]
    long = report.melt(id_vars='system', value_vars=operations,
                       var_name='operation', value_name='reduction')
    long['operation'] = long['operation'].str.lstrip('%')
    long['reduction'] = pd.to_numeric(long['reduction'], errors='coerce')

    fig, ax = plt.subplots(figsize=(10, 6))
    sns.barplot(data=long, x='system', y='reduction', hue='operation',
                palette=OPERATION_COLORS, ax=ax)
    ax.axhline(0, color='black', linewidth=0.8)
    ax.set_xlabel('System', fontsize=12)
    ax.set_ylabel('% error reduction', fontsize=12)
    ax.set_title(title, fontsize=14, fontweight='bold')
    for container in ax.containers:
        _annotate_bars(ax, container, fmt='{:.1f}')

    plt.tight_layout()
    filepath = output_path / "edit_reduction.png"
    plt.savefig(filepath, dpi=150, bbox_inches='tight')
    plt.close()

    return str(filepath)


def generate_all_figures(results: Dict, output_dir) -> Dict[str, str]:
    """
    Generate every figure whose data is present.

    Args:
        results: may hold 'metric_log', 'ablation', 'architectures' and
            'edit_reduction' frames
        output_dir: directory to save figures

    Returns:
        Dict mapping figure names to file paths
    """
    output_path = Path(output_dir)
    output_path.mkdir(parents=True, exist_ok=True)

    figures = {}

    if results.get('metric_log') is not None:
        figures['training'] = create_training_curves(results['metric_log'], output_path)

    if results.get('ablation') is not None:
        figures['ablation'] = create_ablation_bar_chart(results['ablation'], output_path)

    if results.get('architectures') is not None:
        figures['architectures'] = create_ablation_bar_chart(
            results['architectures'], output_path, title="Architecture Comparison",
            filename="architecture_comparison.png")

    if results.get('edit_reduction') is not None:
        figures['edit_reduction'] = create_edit_reduction_chart(results['edit_reduction'], output_path)

    print(f"Generated {len(figures)} figures in {output_dir}")

    return figures
