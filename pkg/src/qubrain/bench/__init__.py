"""Benchmark harness: metrics, run records, checkpoints, reports, CLI."""
