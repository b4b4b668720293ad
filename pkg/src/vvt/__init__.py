"""RISC-V malware and anomaly detection from opcode n-grams and hardware counters."""

__version__ = "0.1.0"
