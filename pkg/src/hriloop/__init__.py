"""Real-time reactive robot motion generation with human-in-the-loop feedback.

Subpackage map:

- ``skeleton`` / ``geometry`` / ``rotations``: kinematic value types, forward
  kinematics, alignment, sequence resampling.
- ``surface``: bone-capsule body-surface proxy and hand-to-surface distance
  fields.
- ``model``: the learned reactive motion generator and its training loop.
- ``retarget``: offline kinematic retargeting oracle and the learned online
  skeleton-to-angles retargeter.
- ``data``: interchange formats, synthetic interaction generator, benchmark
  builder, negative-sample factory.
- ``metrics``: the evaluation suite (position, contact, distribution, and
  retrieval metrics).
- ``adaptation``: rating-driven fine-tuning from recorded sessions.
- ``service``: streaming TCP/WebSocket runtime.
- ``cli``: command-line entry point.
"""

__version__ = "0.1.0"
