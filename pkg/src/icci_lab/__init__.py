"""Desk-scale lab for joint optical-encoding/symbol-coding links and their
classical source/channel-coded baseline."""

__version__ = "0.1.0"
