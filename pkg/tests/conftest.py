from hypothesis import HealthCheck, settings

# numba compiles on first call; the first example would blow any deadline
settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")
