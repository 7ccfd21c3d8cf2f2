from enum import Enum
from typing import List, Optional, Dict, Any
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# report names become file names inside the output directory
REPORT_NAME_PATTERN = r"^[A-Za-z0-9_.-]+$"


class ClassKind(str, Enum):
    SOBOLEV_MIXED = "sobolev_mixed"  # W^r_2
    KOROBOV = "korobov"  # E^r


class ClassSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: ClassKind
    r: float = Field(gt=0)
    d: int = Field(ge=1)
    quasi_algebra_constant: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def check_smoothness_range(self) -> "ClassSpec":
        if self.kind == ClassKind.SOBOLEV_MIXED and self.r <= 0.5:
            raise ValueError(f"W^r_2 requires r > 1/2, got r={self.r}")
        if self.kind == ClassKind.KOROBOV and self.r <= 1:
            raise ValueError(f"E^r requires r > 1, got r={self.r}")
        return self

    @property
    def class_id(self) -> str:
        """Short human-readable label, e.g. W^1_2(d=2)."""
        if self.kind == ClassKind.SOBOLEV_MIXED:
            return f"W^{self.r:g}_2(d={self.d})"
        return f"E^{self.r:g}(d={self.d})"

    @property
    def kernel_exponent(self) -> float:
        """Exponent alpha of the 1D sums driving worst-case errors (2r for W, r for E)."""
        return 2 * self.r if self.kind == ClassKind.SOBOLEV_MIXED else self.r

    def with_quasi_algebra_constant(self, a: float) -> "ClassSpec":
        return self.model_copy(update={"quasi_algebra_constant": float(a)})

    def to_payload(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "r": self.r, "d": self.d}


class BoxKind(str, Enum):
    TENSOR = "tensor"
    HYPERBOLIC = "hyperbolic_cross"


class FrequencyBox(BaseModel):
    """Finite symmetric truncation domain: |k_j| <= K, or prod k_j* <= T."""
    model_config = ConfigDict(frozen=True)

    kind: BoxKind = BoxKind.TENSOR
    d: int = Field(ge=1)
    limit: float = Field(ge=0)

    @model_validator(mode="after")
    def check_limit(self) -> "FrequencyBox":
        if self.kind == BoxKind.HYPERBOLIC and self.limit < 1:
            raise ValueError("hyperbolic cross needs T >= 1 to contain 0")
        return self

    @classmethod
    def tensor(cls, d: int, limit: int) -> "FrequencyBox":
        return cls(kind=BoxKind.TENSOR, d=d, limit=limit)

    @classmethod
    def hyperbolic(cls, d: int, limit: float) -> "FrequencyBox":
        return cls(kind=BoxKind.HYPERBOLIC, d=d, limit=limit)

    @property
    def extent(self) -> int:
        """Largest |k_j| any point of the box can have."""
        return int(self.limit)


class RuleKind(str, Enum):
    FIBONACCI = "fibonacci"
    RANK1 = "rank1"
    MONTE_CARLO = "monte_carlo"
    TENSOR_GRID = "tensor_grid"
    EXPLICIT = "explicit"


class RuleTag(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: RuleKind
    m: int = Field(ge=1)
    n: Optional[int] = None  # Fibonacci index
    generator: Optional[List[int]] = None
    seed: Optional[int] = None
    grid: Optional[int] = None  # points per axis

    @property
    def rule_id(self) -> str:
        if self.kind == RuleKind.FIBONACCI:
            return f"fibonacci(n={self.n})"
        if self.kind == RuleKind.RANK1:
            z = ",".join(str(v) for v in (self.generator or []))
            return f"rank1(m={self.m},z=({z}))"
        if self.kind == RuleKind.MONTE_CARLO:
            return f"monte_carlo(m={self.m},seed={self.seed})"
        if self.kind == RuleKind.TENSOR_GRID:
            return f"tensor_grid(n={self.grid})"
        return f"explicit(m={self.m})"


class Rank1Generator(BaseModel):
    model_config = ConfigDict(frozen=True)

    m: int = Field(ge=1)
    z: List[int] = Field(min_length=1)

    @model_validator(mode="after")
    def check_components(self) -> "Rank1Generator":
        for zj in self.z:
            if self.m == 1:
                if zj != 0:
                    raise ValueError("m=1 admits only the zero generator")
            elif not 1 <= zj < self.m:
                raise ValueError(f"generator components must lie in [1, m), got {zj} for m={self.m}")
        return self

    @property
    def d(self) -> int:
        return len(self.z)


class KappaInterval(BaseModel):
    """Certified enclosure of a worst-case integration error."""
    lo: float = Field(ge=0)
    hi: float = Field(ge=0)
    method: str
    enumeration_limit: Optional[int] = None
    tail: float = 0.0

    @model_validator(mode="after")
    def check_order(self) -> "KappaInterval":
        if self.hi < self.lo:
            raise ValueError(f"interval is empty: [{self.lo}, {self.hi}]")
        return self


class QuasiAlgebraReport(BaseModel):
    kind: ClassKind
    r: float
    d: int
    constant: float  # max of truncated ratios
    constant_upper: float  # same maximiser with the tail bound added
    argmax: List[int]
    n_limit: int
    box_limit: int
    tail_bound: float


class DefectRecord(BaseModel):
    f_id: str
    q: int
    signed_defect: float
    er_abs: float
    rule_id: str
    class_id: str
    m: int

    def csv_row(self) -> List[str]:
        return [self.rule_id, self.class_id, str(self.q), str(self.m),
                repr(self.signed_defect), repr(self.er_abs)]


class DiscretizationBound(BaseModel):
    value: float = Field(ge=0)
    quasi_algebra_constant: float = Field(gt=0)
    chain_power: int  # a is raised to q-1
    kappa: KappaInterval
    q: int


class EntropyForm(str, Enum):
    POWER_LAW = "power_law"
    EXPLICIT = "explicit"


class EntropySequence(BaseModel):
    """Entropy numbers eps_n of a class in the uniform norm, n >= 1."""
    model_config = ConfigDict(frozen=True)

    form: EntropyForm = EntropyForm.POWER_LAW
    C1: float = Field(default=1.0, gt=0)
    r: float = Field(default=0.25, gt=0)
    values: Optional[List[float]] = None  # eps_1..eps_N for the explicit form
    M: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def check_values(self) -> "EntropySequence":
        if self.form == EntropyForm.EXPLICIT:
            if not self.values:
                raise ValueError("explicit entropy sequence needs values")
            if any(v <= 0 for v in self.values):
                raise ValueError("entropy numbers must be positive")
            if any(b > a for a, b in zip(self.values, self.values[1:])):
                raise ValueError("entropy numbers must be nonincreasing")
        return self

    def value(self, n: int) -> float:
        if n < 1:
            raise ValueError("entropy numbers are indexed from 1")
        if self.form == EntropyForm.POWER_LAW:
            return self.C1 * float(n) ** (-self.r)
        return self.values[n - 1]

    def value_at_power_of_two(self, j: int) -> float:
        """eps_{2^j}; the power law is evaluated as C1 * 2^(-r j) to keep dyadic values exact."""
        if self.form == EntropyForm.POWER_LAW:
            return self.C1 * 2.0 ** (-self.r * j)
        return self.value(2 ** j)

    @property
    def available(self) -> Optional[int]:
        return len(self.values) if self.form == EntropyForm.EXPLICIT else None


class TailKind(str, Enum):
    HOEFFDING = "hoeffding"
    BERNSTEIN = "bernstein"
    UNION = "union"
    BT1 = "bt1"
    BT3 = "bt3"
    BC1 = "bc1"
    BC2 = "bc2"


class TailBoundReport(BaseModel):
    kind: TailKind
    m: Optional[int] = None
    eta: Optional[float] = None
    parameters: Dict[str, float] = {}
    raw: float  # unclamped formula value
    bound: float = Field(ge=0, le=1)
    minimal_m: Optional[int] = None


class McMseReport(BaseModel):
    m: int
    exact: float  # (1/m)(||f||_2^2 - |I(f)|^2)
    bound: float  # ||f||_2^2 / m


class EmpiricalMseReport(BaseModel):
    m: int
    n_draws: int
    mean: float
    standard_error: float


class Bt3Report(BaseModel):
    J: int
    S_J: float
    required_m: int
    threshold: float  # eta / (8M)
    M: float


class RateModel(str, Enum):
    LOG_POWER = "log_power"  # log e = -r log m + beta log log m + c
    POWER = "power"  # beta fixed at 0


class RateFitReport(BaseModel):
    model: RateModel
    pairs: List[List[float]]
    r_hat: float
    beta_hat: float
    c_hat: float
    residual: float


class RandomDesignRow(BaseModel):
    m: int
    best: float
    median: float
    worst: float
    tail_fraction: Dict[str, float]
    union_prediction: Dict[str, float]
    within_union_bound: bool


class RandomDesignReport(BaseModel):
    seed: int
    trials: int
    family_size: int
    M: float  # certified sup-norm bound of the squared family
    rows: List[RandomDesignRow]
    median_rate: Optional[float] = None
    best_rate: Optional[RateFitReport] = None  # best-over-trials sup against m^{-r}
    note: str = "family suprema are lower bounds on the class supremum"


class RuleFamilyKind(str, Enum):
    FIBONACCI = "fibonacci"
    KOROBOV = "korobov"
    MONTE_CARLO = "monte_carlo"


class RuleFamily(BaseModel):
    kind: RuleFamilyKind
    n_min: Optional[int] = None
    n_max: Optional[int] = None
    m_list: List[int] = []
    trials: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def check_nonempty(self) -> "RuleFamily":
        if self.kind == RuleFamilyKind.FIBONACCI:
            if self.n_min is None or self.n_max is None or self.n_max < self.n_min:
                raise ValueError("fibonacci family needs n_min <= n_max")
            if self.n_min < 2:
                raise ValueError("fibonacci rules start at n=2")
        elif not self.m_list:
            raise ValueError(f"{self.kind.value} family needs a non-empty m_list")
        return self


class ExperimentConfig(BaseModel):
    name: str = Field(default="experiment", pattern=REPORT_NAME_PATTERN)
    class_spec: ClassSpec
    rule_family: RuleFamily
    q: int = 2
    enumeration_limit: int = Field(default=64, ge=1)
    sample_box_limit: int = Field(default=3, ge=0)
    fooling_box_limit: int = Field(default=3, ge=0)
    quasi_box_limit: int = Field(default=2048, ge=1)
    n_samples: int = Field(default=100, ge=0)
    seed: int = 0
    output_dir: Optional[str] = None

    @field_validator("q")
    @classmethod
    def check_even(cls, q: int) -> int:
        if q <= 0 or q % 2:
            raise ValueError(f"q must be an even positive integer, got {q}")
        return q


class ExperimentRow(BaseModel):
    rule_id: str
    m: int
    kappa_lo: float
    kappa_hi: float
    bound: float
    empirical_sup: float
    witness_er: float
    fooling_integral: Optional[float] = None
    certified_lower: Optional[float] = None
    sandwich_ok: bool


class ExperimentReport(BaseModel):
    config: ExperimentConfig
    rows: List[ExperimentRow]
    quasi_algebra: QuasiAlgebraReport
    fits: Dict[str, RateFitReport] = {}
    reference_model: str
    all_passed: bool
    csv_path: Optional[str] = None
    json_path: Optional[str] = None


class ComputationResponse(BaseModel):
    success: bool
    message: str
    result: Optional[Dict[str, Any]] = None


class TrigPolynomialPayload(BaseModel):
    """JSON form of a trigonometric polynomial: rows [k_1..k_d, re, im]."""
    d: int = Field(ge=1)
    coeffs: List[List[float]]

    @model_validator(mode="after")
    def check_rows(self) -> "TrigPolynomialPayload":
        for row in self.coeffs:
            if len(row) != self.d + 2:
                raise ValueError(f"coefficient rows need d+2={self.d + 2} entries, got {len(row)}")
        return self


class RuleRequest(BaseModel):
    kind: RuleKind
    d: int = Field(default=2, ge=1)
    n: Optional[int] = None
    m: Optional[int] = None
    z: Optional[List[int]] = None
    seed: int = 0
    grid: Optional[int] = None


class QualityRequest(BaseModel):
    rule: RuleRequest
    class_spec: ClassSpec
    method: str = "auto"
    enumeration_limit: int = Field(default=64, ge=1)


class ErEvalRequest(BaseModel):
    rule: RuleRequest
    polynomial: TrigPolynomialPayload
    q: int = 2


class ErBatchRequest(BaseModel):
    rule: RuleRequest
    class_spec: ClassSpec
    polynomials: List[TrigPolynomialPayload] = Field(min_length=1)
    q: int = 2
    name: str = Field(default="defects", pattern=REPORT_NAME_PATTERN)
    output_dir: Optional[str] = None


class ErBoundRequest(BaseModel):
    rule: RuleRequest
    class_spec: ClassSpec
    q: int = 2
    sample_box_limit: int = Field(default=3, ge=0)
    quasi_box_limit: int = Field(default=2048, ge=1)


class WitnessRequest(BaseModel):
    rule: RuleRequest
    class_spec: ClassSpec
    box_limit: int = Field(default=8, ge=1)


class FoolRequest(BaseModel):
    rule: RuleRequest
    class_spec: ClassSpec
    box_limit: int = Field(default=4, ge=0)
    q: int = 2


class McExperimentRequest(BaseModel):
    class_spec: ClassSpec
    box_limit: int = Field(default=2, ge=0)
    m_list: List[int] = Field(min_length=1)
    trials: int = Field(default=50, ge=1)
    family_size: int = Field(default=8, ge=1)
    eta_grid: List[float] = Field(min_length=1)
    seed: int = 0


class RateFitRequest(BaseModel):
    pairs: List[List[float]]
    model: RateModel = RateModel.LOG_POWER
