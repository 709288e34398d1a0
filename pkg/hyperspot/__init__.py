"""Crime hotspot forecasting with hyper-ensembles of under-sampled learners."""
