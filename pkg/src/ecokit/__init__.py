"""Infer competition-mutualism networks among clusters of online groups.

Pipeline: event logs -> weekly size panels and user frequencies
(:mod:`ecokit.ingest`) -> overlap embedding and density
(:mod:`ecokit.overlap`) -> clusters (:mod:`ecokit.cluster`) -> density
dependence regression (:mod:`ecokit.density`) -> per-cluster VAR(1) fits
(:mod:`ecokit.var`) -> impulse-response networks (:mod:`ecokit.irf`) ->
forecast scoring (:mod:`ecokit.forecast`).
"""
__version__ = "0.1.0"
