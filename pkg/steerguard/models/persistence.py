"""
Model save/load through the artifact store.
"""
import logging
from typing import List

from steerguard.core.errors import ArtifactError
from steerguard.models.zoo import (ARCHITECTURES, LINEAR_ARCH, Activation, ConvLayer, DenseLayer,
                                   Layer, RegressionModel)
from steerguard.storage import ArtifactStore, get_artifact_store

logger = logging.getLogger(__name__)

MODEL_KIND = 'model'


def layer_descriptors(model: RegressionModel) -> List[dict]:
    descriptors = []
    for layer in model.layers:
        if isinstance(layer, ConvLayer):
            descriptors.append({'kind': 'conv', 'stride': layer.stride})
        else:
            descriptors.append({'kind': layer.kind})
    return descriptors


def model_arrays(model: RegressionModel):
    return [(name, t.data) for name, t in model.named_parameters()]


def model_metadata(model: RegressionModel) -> dict:
    return {
        'arch_id': model.arch_id,
        'input_size': model.input_size,
        'feature_tap': model.feature_tap,
        'layers': layer_descriptors(model),
        'provenance': model.provenance,
    }


def model_from_artifact(metadata: dict, arrays: dict) -> RegressionModel:
    try:
        arch_id = metadata['arch_id']
        input_size = int(metadata['input_size'])
        descriptors = metadata['layers']
    except (KeyError, TypeError, ValueError) as e:
        raise ArtifactError(f'model metadata is incomplete: {e}')
    if not isinstance(arch_id, str) or (arch_id not in ARCHITECTURES and arch_id != LINEAR_ARCH):
        raise ArtifactError(f'unknown arch {arch_id!r} in model artifact')

    layers: List[Layer] = []
    for index, desc in enumerate(descriptors):
        kind = desc.get('kind')
        if kind in ('conv', 'dense'):
            try:
                weight = arrays[f'layer{index}.weight']
                bias = arrays[f'layer{index}.bias']
            except KeyError as e:
                raise ArtifactError(f'model payload lacks {e.args[0]}')
            if kind == 'conv':
                layers.append(ConvLayer(weight, bias, int(desc.get('stride', 1))))
            else:
                layers.append(DenseLayer(weight, bias))
        elif kind in ('relu', 'tanh', 'flatten'):
            layers.append(Activation(kind))
        else:
            raise ArtifactError(f'unknown layer kind {kind!r} in arch {arch_id!r}')
    return RegressionModel(arch_id, input_size, layers, metadata.get('feature_tap'),
                           metadata.get('provenance'))


def save_model(model: RegressionModel, path: str, store: ArtifactStore = None) -> str:
    store = store or get_artifact_store()
    return store.save(path, MODEL_KIND, model_arrays(model), model_metadata(model))


def load_model(path: str, store: ArtifactStore = None) -> RegressionModel:
    store = store or get_artifact_store()
    header, arrays = store.load(path, expected_kind=MODEL_KIND)
    model = model_from_artifact(header.get('metadata') or {}, arrays)
    logger.debug(f'Loaded {model!r} from {path}')
    return model
