"""
Apps package.

Django applications, lowest layer first:
  - core: exceptions, CSV/PGM helpers, the SVT1 tensor container
  - monitoring: structured logging, Prometheus metrics
  - numerics: seeded RNG, autodiff tensors, layers, Adam, gradient checks
  - scenes: synthetic tabletop episodes and datasets
  - encoders: patch embedders, semantic/spatial towers, instruction encoder
  - pruning: instruction-driven and spatial-aggregation pruners
  - fusion: dense and sparse fusers, the visual set Z
  - decoding: action placeholders, parallel decoder, typed heads
  - efficiency: FLOPs/token accounting, wall-clock bench
  - harness: config, pipeline, training, evaluation, management commands
"""
