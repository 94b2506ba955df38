from faultscope.campaign import (
    CampaignConfig,
    CampaignReport,
    dry_run,
    generate_model_sequences,
    run_campaign,
    schedule_workers,
)
from faultscope.emulator import Emulator
from faultscope.faults import (
    ConcreteFault,
    FaultModelSpec,
    InjectionPoint,
    enumerate_injection_points,
    install,
    load_models,
)
from faultscope.loader import load_binary, load_elf, load_image
from faultscope.oracles import (
    ExploitabilityModel,
    address_reached_model,
    dfa_aes_model,
    output_mismatch_model,
)
from faultscope.profiles import UbProfile, get_profile
from faultscope.testkit import ProgramBuilder, assemble
from faultscope.tracer import audit_report, replay
from faultscope.exceptions import (
    ConfigError,
    DecodeError,
    EmulatorError,
    FaultError,
    FaultscopeError,
    HardFault,
    MalformedCombinationError,
    MemoryAccessError,
    ReportError,
)


def int_or_str(value):
    try:
        return int(value)
    except ValueError:
        return value


__version__ = '0.4.0'
VERSION = tuple(map(int_or_str, __version__.split('.')))

__all__ = [
    'address_reached_model',
    'assemble',
    'audit_report',
    'CampaignConfig',
    'CampaignReport',
    'ConcreteFault',
    'ConfigError',
    'DecodeError',
    'dfa_aes_model',
    'dry_run',
    'Emulator',
    'EmulatorError',
    'enumerate_injection_points',
    'ExploitabilityModel',
    'FaultError',
    'FaultModelSpec',
    'FaultscopeError',
    'generate_model_sequences',
    'get_profile',
    'HardFault',
    'InjectionPoint',
    'install',
    'load_binary',
    'load_elf',
    'load_image',
    'load_models',
    'MalformedCombinationError',
    'MemoryAccessError',
    'output_mismatch_model',
    'ProgramBuilder',
    'replay',
    'ReportError',
    'run_campaign',
    'schedule_workers',
    'UbProfile',
]
