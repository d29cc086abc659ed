#!/usr/bin/env python3
"""
Test visualization independently
"""

import sys

import numpy as np
import pandas as pd
import pytest

from plotting import PANELS, plot_coding, plot_signal
from scenarios import dip_signal

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def test_signal_plot(tmp_path):
    s = dip_signal()
    path = plot_signal(s.samples, s.sample_rate_hz, tmp_path / 'dip.png', title='Voltage dip')
    assert path.read_bytes()[:8] == PNG_MAGIC


def test_coding_plot(tmp_path):
    x = np.sin(np.linspace(0, 20, 500))
    y = np.round(x, 2)
    frame = pd.DataFrame({'original': x, 'coding_output': x - np.roll(x, 1),
                          'decoding_output': y, 'error': y - x})
    assert [column for column, _ in PANELS] == list(frame.columns)
    path = plot_coding(frame, tmp_path / 'coding.png', title='Coding')
    assert path.read_bytes()[:8] == PNG_MAGIC


def test_coding_plot_needs_all_columns(tmp_path):
    with pytest.raises(KeyError):
        plot_coding(pd.DataFrame({'original': [1.0, 2.0]}), tmp_path / 'bad.png')


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
