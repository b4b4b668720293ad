from hypothesis import settings

# Several properties warm caches (encoding tables) or run small trainings on
# first call; wall-clock deadlines would make them flaky.
settings.register_profile("default", deadline=None)
settings.load_profile("default")
