"""umphcs: desk-scale unified mobile public health care system.

Emulated sensor hub and wire protocol, six diagnostic pipelines, a
patient record store with trend screening, a sync client/server, and an
operator CLI plus web-console gateway.
"""

__version__ = "0.1.0"
