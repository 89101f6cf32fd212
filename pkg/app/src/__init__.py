"""Mobile ad-hoc network routing simulator and benchmark harness."""

import os

# pygame prints a banner on import; the CLI writes machine-readable output.
os.environ.setdefault("PYGAME_HIDE_SUPPORT_PROMPT", "1")
