"""JSON run configuration: parsing, validation and canonical serialization.

Structure is checked against `CONFIG_SCHEMA` (JSON Schema 2020-12); the
mathematical admissibility checks that a schema cannot express follow.
"""

import hashlib
import json
from dataclasses import dataclass, field, replace

from jsonschema import Draft202012Validator, validators
from jsonschema.exceptions import best_match

from .errors import ConstraintError, SchemaError
from .model import Coupling, VortexSet
from .plane import PlaneOptions
from .radial import ShootingOptions
from .torus import SolverOptions

RADIAL_MODES = ('radial-topological', 'radial-nontopological', 'radial-sweep')
TORUS_MODES = ('torus', 'lambda-critical')
MODES = RADIAL_MODES + TORUS_MODES + ('plane',)
TARGET_FIELDS = {
    'radial-nontopological': ('beta', 'a'),
    'radial-sweep': ('a_range', 'a_offset_range', 'samples', 'workers'),
    'plane': ('subsolution_a',),
}

POSITIVE = {'type': 'number', 'exclusiveMinimum': 0}
PAIR = {'type': 'array', 'items': {'type': 'number'}, 'minItems': 2, 'maxItems': 2}


def _object(properties: dict, **kw) -> dict:
    return {'type': 'object', 'properties': properties, 'additionalProperties': False, **kw}


def _targets(mode: str, properties: dict, required: bool = False, **kw) -> dict:
    then = {'properties': {'targets': _object(properties, **kw)}}
    if required:
        then['required'] = ['targets']
    return {'if': {'properties': {'mode': {'const': mode}}, 'required': ['mode']}, 'then': then}


CONFIG_SCHEMA = {
    '$schema': 'https://json-schema.org/draft/2020-12/schema',
    '$defs': {
        'radial_domain': _object({
            't_start': {'type': 'number', 'exclusiveMaximum': 0},
            't_max': POSITIVE,
        }),
        'torus_domain': _object({
            'Lx': POSITIVE,
            'Ly': POSITIVE,
            'nx': {'type': 'integer', 'minimum': 16, 'multipleOf': 2},
            'ny': {'type': 'integer', 'minimum': 16, 'multipleOf': 2},
            'laplacian': {'enum': ['fd', 'spectral']},
        }, required=['Lx', 'Ly', 'nx', 'ny']),
        'plane_domain': _object({
            'R_schedule': {'type': 'array', 'items': POSITIVE, 'minItems': 1},
            'n': {'type': 'integer', 'minimum': 3},
            'closure': {'enum': ['zero', 'asymptotic']},
            'newton': {'type': 'boolean'},
        }, required=['R_schedule', 'n']),
    },
    **_object({
        'mode': {'enum': list(MODES)},
        'coupling': _object({'kappa': POSITIVE, 'lambda': POSITIVE}, minProperties=1, maxProperties=1),
        'vortices': {
            'type': 'array',
            'items': _object({
                'x': {'type': 'number'},
                'y': {'type': 'number'},
                'n': {'type': 'integer', 'minimum': 1},
            }, required=['x', 'y']),
        },
        'domain': {'type': 'object'},
        'solver': _object({
            'K_factor': {'type': 'number'},
            'tol': POSITIVE,
            'max_iter': {'type': 'integer', 'minimum': 1},
            'divergence_drop': POSITIVE,
            'abs_tol': POSITIVE,
            'rel_tol': POSITIVE,
        }),
        'targets': {'type': 'object'},
        'output': {'type': 'string'},
    }, required=['mode', 'coupling', 'vortices']),
    'allOf': [
        {
            'if': {'properties': {'mode': {'enum': list(RADIAL_MODES)}}, 'required': ['mode']},
            'then': {'properties': {'domain': {'$ref': '#/$defs/radial_domain'}}},
        },
        {
            'if': {'properties': {'mode': {'enum': list(TORUS_MODES)}}, 'required': ['mode']},
            'then': {'properties': {'domain': {'$ref': '#/$defs/torus_domain'}}, 'required': ['domain']},
        },
        {
            'if': {'properties': {'mode': {'const': 'plane'}}, 'required': ['mode']},
            'then': {'properties': {'domain': {'$ref': '#/$defs/plane_domain'}}, 'required': ['domain']},
        },
        _targets('radial-topological', {}),
        _targets('torus', {}),
        _targets('lambda-critical', {}),
        _targets(
            'radial-nontopological',
            {'beta': {'type': 'number'}, 'a': {'type': 'number'}},
            required=True,
            oneOf=[{'required': ['beta']}, {'required': ['a']}],
        ),
        _targets(
            'radial-sweep',
            {
                'a_range': PAIR,
                'a_offset_range': PAIR,
                'samples': {'type': 'integer', 'minimum': 2},
                'workers': {'type': 'integer', 'minimum': 1},
            },
            required=True,
            oneOf=[{'required': ['a_range']}, {'required': ['a_offset_range']}],
        ),
        _targets('plane', {'subsolution_a': {'type': 'number'}}),
    ],
}


def _is_strict_integer(checker, instance) -> bool:
    return isinstance(instance, int) and not isinstance(instance, bool)


# 32.0 is not an integer here
ConfigValidator = validators.extend(
    Draft202012Validator,
    type_checker=Draft202012Validator.TYPE_CHECKER.redefine('integer', _is_strict_integer),
)


def error_path(error) -> str:
    """JSONPath-style location of a validation error, down to the offending key."""
    path = '$'
    for part in error.absolute_path:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    if isinstance(error.instance, dict):
        if error.validator == 'additionalProperties':
            extra = sorted(set(error.instance) - set(error.schema.get('properties', {})))
            if extra:
                path += f".{extra[0]}"
        elif error.validator == 'required':
            missing = [k for k in error.validator_value if k not in error.instance]
            if missing:
                path += f".{missing[0]}"
    return path


def validate_schema(doc) -> None:
    """Raise SchemaError for the most relevant structural problem in `doc`."""
    error = best_match(ConfigValidator(CONFIG_SCHEMA).iter_errors(doc))
    if error is not None:
        raise SchemaError(error_path(error), error.message)


@dataclass(frozen=True)
class CouplingSpec:
    """Exactly one of κ or λ, as given in the file."""
    kappa: float | None = None
    lambda_: float | None = None

    @property
    def coupling(self) -> Coupling:
        if self.kappa is not None:
            return Coupling.from_kappa(self.kappa)
        return Coupling.from_lambda(self.lambda_)

    def to_dict(self) -> dict:
        return {'kappa': self.kappa} if self.kappa is not None else {'lambda': self.lambda_}


@dataclass(frozen=True)
class RadialDomain:
    t_start: float = -12.0
    t_max: float = 40.0

    def to_dict(self) -> dict:
        return {'t_start': self.t_start, 't_max': self.t_max}


@dataclass(frozen=True)
class TorusDomain:
    Lx: float
    Ly: float
    nx: int
    ny: int
    laplacian: str = 'fd'

    def to_dict(self) -> dict:
        return {'Lx': self.Lx, 'Ly': self.Ly, 'nx': self.nx, 'ny': self.ny, 'laplacian': self.laplacian}


@dataclass(frozen=True)
class PlaneDomain:
    R_schedule: tuple[float, ...]
    n: int
    closure: str = 'zero'
    newton: bool = True

    def to_dict(self) -> dict:
        return {'R_schedule': list(self.R_schedule), 'n': self.n, 'closure': self.closure, 'newton': self.newton}


@dataclass(frozen=True)
class SolverConfig:
    K_factor: float = 6.0
    tol: float = 1e-10
    max_iter: int = 5000
    divergence_drop: float = 50.0
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class Targets:
    """Mode-specific targets; unused members stay None."""
    beta: float | None = None
    a: float | None = None
    a_range: tuple[float, float] | None = None
    a_offset_range: tuple[float, float] | None = None
    samples: int = 20
    workers: int = 1
    subsolution_a: float | None = None

    def to_dict(self, mode: str) -> dict:
        out = {}
        for k in TARGET_FIELDS.get(mode, ()):
            v = getattr(self, k)
            if v is not None:
                out[k] = list(v) if isinstance(v, tuple) else v
        return out


@dataclass(frozen=True)
class RunConfig:
    mode: str
    coupling_spec: CouplingSpec
    vortices: VortexSet
    domain: RadialDomain | TorusDomain | PlaneDomain
    solver: SolverConfig = field(default_factory=SolverConfig)
    targets: Targets = field(default_factory=Targets)
    output: str = 'out'

    @property
    def coupling(self) -> Coupling:
        return self.coupling_spec.coupling

    @property
    def lambda_(self) -> float:
        return self.coupling.lambda_

    @property
    def kappa(self) -> float:
        return self.coupling.kappa

    @property
    def N(self) -> int:
        return self.vortices.N

    def to_dict(self) -> dict:
        return {
            'mode': self.mode,
            'coupling': self.coupling_spec.to_dict(),
            'vortices': self.vortices.to_dicts(),
            'domain': self.domain.to_dict(),
            'solver': self.solver.to_dict(),
            'targets': self.targets.to_dict(self.mode),
            'output': self.output,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def with_overrides(self, lambda_: float | None = None, output: str | None = None) -> 'RunConfig':
        cfg = self
        if lambda_ is not None:
            if not lambda_ > 0:
                raise ConstraintError(f"--lambda must be positive, got {lambda_}")
            cfg = replace(cfg, coupling_spec=CouplingSpec(lambda_=float(lambda_)))
        if output is not None:
            cfg = replace(cfg, output=output)
        return cfg

    def shooting_options(self) -> ShootingOptions:
        d = self.domain
        return ShootingOptions(
            t_start=d.t_start, t_max=d.t_max,
            abs_tol=self.solver.abs_tol, rel_tol=self.solver.rel_tol,
        )

    def solver_options(self) -> SolverOptions:
        laplacian = self.domain.laplacian if isinstance(self.domain, TorusDomain) else 'fd'
        return SolverOptions(
            K_factor=self.solver.K_factor, tol=self.solver.tol, max_iter=self.solver.max_iter,
            divergence_drop=self.solver.divergence_drop, laplacian=laplacian,
        )

    def plane_options(self) -> PlaneOptions:
        return PlaneOptions(solver=self.solver_options(), closure=self.domain.closure, newton=self.domain.newton)


def _pair(t: dict, key: str):
    v = t.get(key)
    if v is None:
        return None
    if not v[0] < v[1]:
        raise SchemaError(f"$.targets.{key}", "expected [low, high] with low < high")
    return float(v[0]), float(v[1])


def _domain(mode: str, d: dict):
    if mode in RADIAL_MODES:
        return RadialDomain(t_start=float(d.get('t_start', -12.0)), t_max=float(d.get('t_max', 40.0)))
    if mode in TORUS_MODES:
        return TorusDomain(
            Lx=float(d['Lx']), Ly=float(d['Ly']), nx=d['nx'], ny=d['ny'], laplacian=d.get('laplacian', 'fd'),
        )
    schedule = d['R_schedule']
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise SchemaError('$.domain.R_schedule', "must be strictly increasing")
    return PlaneDomain(
        R_schedule=tuple(float(R) for R in schedule),
        n=d['n'],
        closure=d.get('closure', 'zero'),
        newton=d.get('newton', True),
    )


def _solver(s: dict) -> SolverConfig:
    defaults = SolverConfig()
    cfg = SolverConfig(
        K_factor=float(s.get('K_factor', defaults.K_factor)),
        tol=float(s.get('tol', defaults.tol)),
        max_iter=s.get('max_iter', defaults.max_iter),
        divergence_drop=float(s.get('divergence_drop', defaults.divergence_drop)),
        abs_tol=float(s.get('abs_tol', defaults.abs_tol)),
        rel_tol=float(s.get('rel_tol', defaults.rel_tol)),
    )
    if cfg.K_factor < 6:
        raise ConstraintError(f"solver.K_factor={cfg.K_factor} is below 6; the monotone scheme needs K >= 6*lambda")
    return cfg


def _targets_of(mode: str, t: dict, N: int) -> Targets:
    targets = Targets(
        beta=t.get('beta'),
        a=t.get('a'),
        a_range=_pair(t, 'a_range'),
        a_offset_range=_pair(t, 'a_offset_range'),
        samples=t.get('samples', 20),
        workers=t.get('workers', 1),
        subsolution_a=t.get('subsolution_a'),
    )
    if mode == 'radial-nontopological' and targets.beta is not None and not targets.beta > 2 * N + 4:
        raise ConstraintError(
            f"targets.beta={targets.beta} must exceed 2N + 4 = {2 * N + 4}: "
            "non-topological solutions exist for every beta > 2N + 4 and no other"
        )
    if targets.a_offset_range is not None and targets.a_offset_range[1] >= 0:
        raise ConstraintError("targets.a_offset_range must lie below a0 (offsets < 0)")
    if mode == 'plane' and targets.subsolution_a is not None and not targets.subsolution_a > 0:
        raise ConstraintError(f"targets.subsolution_a must be positive, got {targets.subsolution_a}")
    return targets


def parse_config(text: str | dict) -> RunConfig:
    """Validate a JSON run configuration.

    Raises:
        SchemaError: malformed document (carries the field path).
        ConstraintError: well-formed but mathematically inadmissible.
    """
    if isinstance(text, dict):
        doc = text
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise SchemaError('$', f"invalid JSON: {e}") from e
    validate_schema(doc)
    mode = doc['mode']
    c = doc['coupling']
    coupling = CouplingSpec(kappa=float(c['kappa'])) if 'kappa' in c else CouplingSpec(lambda_=float(c['lambda']))
    try:
        vortices = VortexSet.from_dicts([{**v, 'n': v.get('n', 1)} for v in doc['vortices']])
    except ValueError as e:
        raise SchemaError('$.vortices', str(e)) from e
    if mode in RADIAL_MODES and not vortices.is_radial:
        raise ConstraintError(f"{mode} needs all vortices at one point")
    if vortices.N == 0 and mode not in ('torus', 'radial-topological'):
        raise ConstraintError(f"{mode} needs at least one vortex")
    return RunConfig(
        mode=mode,
        coupling_spec=coupling,
        vortices=vortices,
        domain=_domain(mode, doc.get('domain', {})),
        solver=_solver(doc.get('solver', {})),
        targets=_targets_of(mode, doc.get('targets', {}), vortices.N),
        output=doc.get('output', 'out'),
    )


def normalize(text: str | dict) -> dict:
    """Canonical dict form of a configuration (defaults filled in)."""
    return parse_config(text).to_dict()
