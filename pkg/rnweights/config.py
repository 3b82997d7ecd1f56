import os


class Config:
    """Base configuration"""
    TOL_HERM = float(os.environ.get('RN_TOL_HERM', 1e-12))
    TOL_PLUMBING = float(os.environ.get('RN_TOL_PLUMBING', 1e-12))
    TOL_EXACT = float(os.environ.get('RN_TOL_EXACT', 1e-10))
    TOL_LEMMA = float(os.environ.get('RN_TOL_LEMMA', 1e-9))
    TOL_TESTBED_INVARIANCE = float(os.environ.get('RN_TOL_TESTBED_INVARIANCE', 1e-5))
    TOL_TESTBED = float(os.environ.get('RN_TOL_TESTBED', 1e-3))
    LIMIT_DECAY_RATIO = float(os.environ.get('RN_LIMIT_DECAY_RATIO', 0.05))
    RIGIDITY_THRESHOLD = 0.1
    EXACT_LOG_LAMBDA_MAX = 1e-8

    QUAD_HERMITE_NODES = int(os.environ.get('RN_QUAD_HERMITE_NODES', 64))
    QUAD_Y_NODES = int(os.environ.get('RN_QUAD_Y_NODES', 201))
    QUAD_Y_RADIUS = 4.0
    QUAD_ERROR_BUDGET = 1e-8
    QUAD_ERROR_LIMIT = 1e-6

    CONDITION_LIMIT = 1e8
    BRANCH_SAFETY = 0.9 * 3.141592653589793
    INTERIOR_MASS_TOL = float(os.environ.get('RN_INTERIOR_MASS_TOL', 1e-6))
    WEYL_MAX_ABS_NODE = 12.0
    WEYL_FREQ_CUTOFF = float(os.environ.get('RN_WEYL_FREQ_CUTOFF', 12.0))
    MAX_BASIS_DIM = int(os.environ.get('RN_MAX_BASIS_DIM', 4096))

    REPORT_SCHEMA_VERSION = '1.0.0'
    LOG_LEVEL = os.environ.get('RN_LOG_LEVEL', 'INFO')
    SHOW_PROGRESS = True


class DevelopmentConfig(Config):
    """Development configuration"""
    LOG_LEVEL = os.environ.get('RN_LOG_LEVEL', 'DEBUG')


class ProductionConfig(Config):
    """Batch runs: quiet logs, no progress bars"""
    LOG_LEVEL = os.environ.get('RN_LOG_LEVEL', 'WARNING')
    SHOW_PROGRESS = False


class TestingConfig(Config):
    """Testing configuration"""
    LOG_LEVEL = 'WARNING'
    SHOW_PROGRESS = False


config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': Config
}


def get_config(name=None):
    """Resolve the active configuration class (RN_CONFIG, falling back to default)"""
    name = name or os.environ.get('RN_CONFIG', 'default')
    if name not in config:
        raise ValueError(f"Unknown configuration '{name}'. Valid: {', '.join(config)}")
    return config[name]
