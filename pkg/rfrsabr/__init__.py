"""
Caplet pricing on overnight-rate term rates under the backward-looking SABR model
Package initialization
"""

__version__ = '0.1.0'

from .model_core import AccrualPeriod, CapletSpec, CapletStyle, DecayExponent, SabrParams, psi, validate
from .black76 import black_price, implied_vol
from .hagan_vol import hagan_implied_vol, sabr_caplet_price
from .effective_sabr import EffectiveSabrParams, effective_params, original_params
from .quadrature_oracle import effective_params_quadrature
from .pricer import CapletResult, price_backward_caplet, price_caplet, price_forward_caplet
from .mc_engine import McConfig, mc_caplet_smile, simulate_paths
from .hull_white import HullWhiteDecaySpec, decay_shape_report, psi_tilde
from .calibration import calibrate_backward_smile, calibrate_forward_smile, calibrate_q_to_atm_backward
from .config import load_config, load_run_config

# Package exports
__all__ = [
    'AccrualPeriod',
    'CapletSpec',
    'CapletStyle',
    'DecayExponent',
    'SabrParams',
    'psi',
    'validate',
    'black_price',
    'implied_vol',
    'hagan_implied_vol',
    'sabr_caplet_price',
    'EffectiveSabrParams',
    'effective_params',
    'original_params',
    'effective_params_quadrature',
    'CapletResult',
    'price_backward_caplet',
    'price_caplet',
    'price_forward_caplet',
    'McConfig',
    'mc_caplet_smile',
    'simulate_paths',
    'HullWhiteDecaySpec',
    'decay_shape_report',
    'psi_tilde',
    'calibrate_backward_smile',
    'calibrate_forward_smile',
    'calibrate_q_to_atm_backward',
    'load_config',
    'load_run_config',
]
