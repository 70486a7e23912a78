from fastapi import APIRouter, HTTPException, status
from fastapi.responses import PlainTextResponse
from pydantic import ValidationError
import structlog

from app.engines.dataset import load_csv_text, validate_feature_names
from app.engines.export import from_document, render, to_document
from app.engines.grower import grow
from app.exceptions import ComputationError, DataError
from app.schemas import (
    FitRequest,
    GrowConfig,
    ModelDocument,
    PredictRequest,
    PredictResponse,
    RenderRequest,
)

logger = structlog.get_logger()
router = APIRouter()


def _http_error(e: Exception) -> HTTPException:
    if isinstance(e, DataError):
        return HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))
    return HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))


@router.post("/fit", response_model=ModelDocument)
def fit_tree(request: FitRequest):
    """Grow a tree on inline CSV data with a fixed penalty constant"""
    try:
        dataset = load_csv_text(request.csv_text, request.target, request.task)
        class_of_interest = None
        if request.class_of_interest is not None:
            if request.class_of_interest not in dataset.class_labels:
                raise HTTPException(
                    status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
                    detail=f"class '{request.class_of_interest}' does not occur in the target",
                )
            class_of_interest = dataset.class_labels.index(request.class_of_interest)
        config = GrowConfig(
            gain_kind=request.gain_kind,
            penalty=request.penalty,
            k=request.k,
            min_node_fraction=request.min_node_fraction,
            class_of_interest=class_of_interest,
        )
        tree = grow(dataset.all_rows(), config)
    except ValidationError as e:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=e.errors()[0]["msg"])
    except (DataError, ComputationError) as e:
        raise _http_error(e)

    logger.info("Tree fitted", rows=dataset.n_rows, gain_kind=config.gain_kind.value, terminals=tree.n_terminals())
    return to_document(tree)


@router.post("/predict", response_model=PredictResponse)
def predict_rows(request: PredictRequest):
    """Predict feature rows given by name; classification returns class labels"""
    try:
        tree = from_document(request.model)
        for row in request.rows:
            validate_feature_names(tree.feature_names, list(row.keys()))
        predictions = [tree.predict([row[name] for name in tree.feature_names]) for row in request.rows]
    except (DataError, ComputationError) as e:
        raise _http_error(e)

    if request.model.class_labels:
        return PredictResponse(predictions=[tree.class_labels[p] for p in predictions])
    return PredictResponse(predictions=[float(p) for p in predictions])


@router.post("/render", response_class=PlainTextResponse)
def render_tree(request: RenderRequest):
    """DOT or indented text rendering of a model document"""
    try:
        return render(from_document(request.model), request.format)
    except (DataError, ComputationError) as e:
        raise _http_error(e)
    except ValueError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))
