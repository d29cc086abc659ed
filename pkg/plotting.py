#!/usr/bin/env python3
"""
Headless matplotlib rendering of signals and coding results
"""

import matplotlib
matplotlib.use('Agg')  # Set backend before importing pyplot
import matplotlib.pyplot as plt
import numpy as np

PANELS = (
    ('original', 'Original signal'),
    ('coding_output', 'Coding output'),
    ('decoding_output', 'Decoding output'),
    ('error', 'Error'),
)


def plot_signal(samples, sample_rate_hz, path, title='Signal'):
    """Render one waveform against time in milliseconds"""
    samples = np.asarray(samples, dtype=np.float64)
    t_ms = np.arange(samples.size) * 1000.0 / sample_rate_hz

    fig, ax = plt.subplots(figsize=(10, 4))
    ax.plot(t_ms, samples, linewidth=0.8)
    ax.set_xlabel('Time (ms)')
    ax.set_ylabel('Amplitude')
    ax.set_title(title)
    ax.grid(True, alpha=0.3)

    plt.tight_layout()
    plt.savefig(path, dpi=150, bbox_inches='tight')
    plt.close(fig)
    return path


def plot_coding(frame, path, title=None):
    """Four stacked panels from a frame with the plot-data columns"""
    fig, axes = plt.subplots(len(PANELS), 1, figsize=(10, 9), sharex=True)
    for ax, (column, label) in zip(axes, PANELS):
        ax.plot(frame.index, frame[column], linewidth=0.8)
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    axes[-1].set_xlabel('Sample')
    if title:
        axes[0].set_title(title)

    plt.tight_layout()
    plt.savefig(path, dpi=150, bbox_inches='tight')
    plt.close(fig)
    return path
