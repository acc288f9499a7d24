"""complygate: continuous open-source license compliance.

Inventory with a human clearance workflow, dependency-graph ingestion,
declarative policy evaluation, a CI gate that fails builds on divergence,
and generators for compliance material (SBOM, notices, license list, CCS
manifest).
"""

__version__ = "0.1.0"
