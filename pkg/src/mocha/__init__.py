"""Desk-scale RAW video demoiréing toolkit.

Subpackages: ``tensor`` (autodiff core), ``synth`` (paired clip generator),
``analysis`` (frequency/color statistics), ``model`` (restoration network),
``train`` (losses, optimizer, two-stage loop), ``cli`` (command line).
"""

import os

__version__ = "0.1.0"


def thread_cap() -> int:
    """Worker cap from MOCHA_THREADS (>=1). Execution stays deterministic
    for any value; the current implementation runs serially regardless."""
    raw = os.environ.get("MOCHA_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        value = 1
    return max(value, 1)
