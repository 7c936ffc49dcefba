"""Code construction endpoints"""

from fastapi import APIRouter, HTTPException, status

from bandfec.config import get_settings
from bandfec.construct import build_from_params, format_spec, spec_hash
from bandfec.errors import ConstructionError, SpecFormatError
from bandfec.gf2poly import degree_window, find_candidates, format_poly, parse_poly, poly_mul
from bandfec.schemas import BuildResponse, CodeParams, FindPolyRequest, FindPolyResponse

router = APIRouter(prefix="/codes", tags=["Codes"])
settings = get_settings()


@router.post("/findpoly", response_model=FindPolyResponse)
def find_polynomials(request: FindPolyRequest):
    """
    Search candidate polynomials m with a low-weight product u(x)m(x)

    - Full-band rows: degree window just below B
    - edge=true: edge rows, degree at most B/2
    - 404 when no polynomial satisfies the constraints
    """
    try:
        u = parse_poly(request.u)
    except SpecFormatError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))
    if u.is_zero or not u.has_constant_term:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail="u(x) must have constant term 1")

    target = request.max_degree
    if target is None:
        target = request.B // 2 if request.edge else request.B - 1
    lo, hi = degree_window(target, request.delta, settings.degree_tolerance_divisor)
    polys = find_candidates(
        u, hi, request.max_weight, request.count, min_degree=lo, min_product_weight=request.min_weight
    )
    if not polys:
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail="No candidate polynomial found")

    return FindPolyResponse(
        u=format_poly(u),
        min_degree=lo,
        max_degree=hi,
        candidates=[format_poly(m) for m in polys],
        product_weights=[poly_mul(u, m).weight for m in polys],
    )


@router.post("/build", response_model=BuildResponse)
def build_code(params: CodeParams):
    """
    Build a code and return its canonical spec text

    - The spec text is what the CLI's encode/decode commands load
    - 400 when the parameters cannot yield a code
    """
    try:
        spec, code = build_from_params(params)
    except (ConstructionError, SpecFormatError) as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))

    return BuildResponse(
        family=spec.family,
        k=spec.k,
        n=spec.n,
        rate=str(spec.rate),
        spec_hash=spec_hash(spec).hex(),
        spec_text=format_spec(spec),
        bandwidth=code.band_profile.bandwidth if code.band_profile is not None else None,
        check_rows=len(code.check_rows) if code.check_rows is not None else None,
    )
