"""Typed configuration sections and the flat overrides file reader."""

import dataclasses
import logging
from dataclasses import dataclass, field

from app.src.errors import ConfigError
from app.src.settings import settings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RadioConfig:
    """
    Unit-disk radio and simplified 802.11 MAC parameters.

    Attributes:
        range_m (float): Communication radius in meters.
        data_rate_bps (int): Channel bit rate.
        frame_overhead (int): MAC/PHY bytes added to every packet.
        ifq_capacity (int): Interface queue length in packets.
        retry_limit (int): Unicast retransmissions before a CBK drop.
        backoff_min_us, backoff_max_us (int): Uniform random backoff window of a first attempt.
        backoff_doublings (int): How often the window span doubles over unicast retries.
        refresh_interval_s (float): Period of the neighbor-set refresh, 0 disables it.
        collisions (bool): Model interference; off gives an ideal channel where overlapping frames never corrupt each other.
    """

    range_m: float = settings.radio_range_m
    data_rate_bps: int = settings.data_rate_bps
    frame_overhead: int = settings.frame_overhead
    ifq_capacity: int = settings.ifq_capacity
    retry_limit: int = settings.retry_limit
    backoff_min_us: int = settings.backoff_min_us
    backoff_max_us: int = settings.backoff_max_us
    backoff_doublings: int = settings.backoff_doublings
    refresh_interval_s: float = settings.neighbor_refresh_s
    collisions: bool = True

    def __post_init__(self):
        if self.range_m <= 0 or self.data_rate_bps <= 0 or self.ifq_capacity < 1:
            raise ConfigError('radio needs range_m > 0, data_rate_bps > 0 and ifq_capacity >= 1')
        if not 0 <= self.backoff_min_us < self.backoff_max_us:
            raise ConfigError('radio backoff window must satisfy 0 <= min < max')
        if self.backoff_doublings < 0:
            raise ConfigError('radio backoff_doublings must be >= 0')


@dataclass(frozen=True)
class BufferConfig:
    """Send buffer of data packets waiting for a route."""

    capacity: int = settings.send_buffer_capacity
    timeout_s: float = settings.send_buffer_timeout_s
    data_ttl: int = settings.data_ttl


@dataclass(frozen=True)
class DsdvConfig:
    update_interval_s: float = settings.dsdv_update_interval_s
    full_dump_every: int = settings.dsdv_full_dump_every
    trigger_spacing_s: float = settings.dsdv_trigger_spacing_s
    missed_updates: int = settings.dsdv_missed_updates


@dataclass(frozen=True)
class AodvConfig:
    hello_interval_s: float = settings.aodv_hello_interval_s
    allowed_hello_loss: int = settings.aodv_allowed_hello_loss
    active_route_timeout_s: float = settings.aodv_active_route_timeout_s
    node_traversal_time_s: float = settings.aodv_node_traversal_time_s
    rreq_retries: int = settings.aodv_rreq_retries
    net_diameter: int = settings.aodv_net_diameter
    ttl_start: int = settings.aodv_ttl_start
    ttl_increment: int = settings.aodv_ttl_increment
    ttl_threshold: int = settings.aodv_ttl_threshold
    hello_enabled: bool = True
    link_layer_detection: bool = True


@dataclass(frozen=True)
class DsrConfig:
    cache_capacity: int = settings.dsr_cache_capacity
    cache_expiry_s: float = settings.dsr_cache_expiry_s
    max_route_length: int = settings.dsr_max_route_length
    request_period_s: float = settings.dsr_request_period_s
    max_request_period_s: float = settings.dsr_max_request_period_s


@dataclass(frozen=True)
class ZrpConfig:
    radius: int = settings.zrp_radius
    beacon_interval_s: float = settings.zrp_beacon_interval_s
    beacon_loss: int = settings.zrp_beacon_loss
    iarp_refresh_s: float = settings.zrp_iarp_refresh_s
    iarp_min_interval_s: float = settings.zrp_iarp_min_interval_s
    query_timeout_s: float = settings.zrp_query_timeout_s
    query_retries: int = settings.zrp_query_retries

    def __post_init__(self):
        if self.radius < 1:
            raise ConfigError('zrp.radius must be at least 1')


@dataclass(frozen=True)
class SimConfig:
    """All tunables of one simulation run, grouped by section."""

    radio: RadioConfig = field(default_factory=RadioConfig)
    buffer: BufferConfig = field(default_factory=BufferConfig)
    dsdv: DsdvConfig = field(default_factory=DsdvConfig)
    aodv: AodvConfig = field(default_factory=AodvConfig)
    dsr: DsrConfig = field(default_factory=DsrConfig)
    zrp: ZrpConfig = field(default_factory=ZrpConfig)

    def flatten(self):
        """Return every setting as a `section.field -> value` dictionary."""
        flat = {}
        for section in dataclasses.fields(self):
            values = getattr(self, section.name)
            for item in dataclasses.fields(values):
                flat[f'{section.name}.{item.name}'] = getattr(values, item.name)
        return flat


_TRUE = {'1', 'true', 'yes', 'on'}
_FALSE = {'0', 'false', 'no', 'off'}


def _coerce(raw, kind, key):
    if kind is bool or kind == 'bool':
        lowered = raw.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise ConfigError(f'{key}: expected a boolean, got {raw!r}')
    caster = {'int': int, 'float': float}.get(kind, kind)
    try:
        if caster is int and '.' not in raw and 'e' not in raw.lower():
            return int(raw)
        if caster is int:
            value = float(raw)
            if not value.is_integer():
                raise ValueError(raw)
            return int(value)
        return caster(raw)
    except ValueError as error:
        raise ConfigError(f'{key}: cannot read {raw!r} as {getattr(caster, "__name__", caster)}') from error


def read_overrides(path):
    """Read a flat overrides file.

    Args:
        path (str): Path of a file with one `section.field = value` per line.

    Returns:
        dict: The raw string values keyed by `section.field`.
    """
    overrides = {}
    try:
        with open(path, encoding='utf-8') as overrides_file:
            lines = overrides_file.read().splitlines()
    except OSError as error:
        raise ConfigError(f'cannot read overrides file {path}: {error}') from error
    for number, line in enumerate(lines, start=1):
        text = line.split('#', 1)[0].strip()
        if not text:
            continue
        key, sep, value = text.partition('=')
        if not sep or not key.strip() or not value.strip():
            raise ConfigError(f'{path}:{number}: expected "key = value", got {line!r}')
        overrides[key.strip()] = value.strip()
    return overrides


def apply_overrides(config, overrides):
    """Return a copy of `config` with the given `section.field` values replaced.

    Args:
        config (SimConfig): Base configuration.
        overrides (dict): Values keyed by `section.field`; strings are coerced
            to the field's declared type.

    Returns:
        SimConfig: The updated configuration.
    """
    changes = {}
    for key, raw in overrides.items():
        section, _, name = key.partition('.')
        if not hasattr(config, section) or not name:
            raise ConfigError(f'unknown setting {key!r}')
        values = getattr(config, section)
        kinds = {item.name: item.type for item in dataclasses.fields(values)}
        if name not in kinds:
            raise ConfigError(f'unknown setting {key!r}')
        value = _coerce(raw, kinds[name], key) if isinstance(raw, str) else raw
        changes.setdefault(section, {})[name] = value
    for section, values in changes.items():
        logger.debug('overriding %s: %s', section, values)
        try:
            changes[section] = dataclasses.replace(getattr(config, section), **values)
        except TypeError as error:
            raise ConfigError(str(error)) from error
    return dataclasses.replace(config, **changes)


def load_config(path=None):
    """Build the run configuration, applying the overrides file when one is given."""
    config = SimConfig()
    if path:
        config = apply_overrides(config, read_overrides(path))
    return config
