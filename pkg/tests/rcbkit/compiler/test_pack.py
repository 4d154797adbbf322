import json

import numpy as np
import pytest

from rcbkit.compiler.manifest import ManifestError, MappingDescriptor
from rcbkit.compiler.pack import (
    IMAGE_FILE,
    MANIFEST_FILE,
    PLACEMENT_FILE,
    PackError,
    compile_graph,
    decode_plan_bundle,
    encode_plan_bundle,
    load_model,
    read_weights,
)
from rcbkit.rimfs.image import mount
from rcbkit.runtime.context import Runtime


def artifacts(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_pack_layout(xgemm_path, tmp_path):
    out = tmp_path / "xgemm"
    model = compile_graph(xgemm_path, out_dir=out)
    assert sorted(p.name for p in out.iterdir()) == [
        "000.rcb",
        MANIFEST_FILE,
        IMAGE_FILE,
        PLACEMENT_FILE,
    ]
    assert json.loads((out / PLACEMENT_FILE).read_text()) == {"gemm": [0, 0]}
    assert len(model.rcbs) == 1


def test_activation_only_image(xgemm_path):
    img = mount(compile_graph(xgemm_path).image)
    assert len(img) == 0
    assert img.size == 64


def test_weight_offsets(cnn_path, cnn_kernel):
    """Test the weight image layout can be recomputed by hand"""
    model = compile_graph(cnn_path)
    img = mount(model.image)
    assert img.lookup(1) == (64, 16)
    assert bytes(img.view(1)) == cnn_kernel.tobytes()
    assert len(model.image) == 128


def test_load_reproduces_direct_run(cnn_path, tmp_path, rng):
    """Test a packed and reloaded model runs bit-exactly like the in-memory one"""
    direct = compile_graph(cnn_path)
    compile_graph(cnn_path, out_dir=tmp_path / "cnn")
    loaded = load_model(tmp_path / "cnn")
    assert loaded.rcbs == direct.rcbs
    assert loaded.placement == direct.placement

    data = rng.standard_normal(16).astype(np.float32).tobytes()
    outputs = []
    for model in (direct, loaded):
        runtime = Runtime()
        runtime.provision(model)
        outputs.append(runtime.run(data))
    assert outputs[0] == outputs[1]


def test_compile_is_deterministic(cnn_path, tmp_path):
    compile_graph(cnn_path, out_dir=tmp_path / "one")
    compile_graph(cnn_path, out_dir=tmp_path / "two")
    assert artifacts(tmp_path / "one") == artifacts(tmp_path / "two")


def test_repack_removes_stale_blocks(cnn_path, xgemm_path, tmp_path):
    out = tmp_path / "model"
    compile_graph(cnn_path, out_dir=out)
    assert len(list(out.glob("*.rcb"))) == 3
    compile_graph(xgemm_path, out_dir=out)
    assert len(load_model(out).rcbs) == 1


def test_missing_weight_file(data_dir):
    with pytest.raises(PackError):
        compile_graph(data_dir / "cnn.json")


def test_wrong_weight_size(cnn_path):
    with pytest.raises(PackError):
        compile_graph(cnn_path, weights={1: b"\0" * 12})


def test_weights_dict_and_text(cnn_path, cnn_kernel):
    model = compile_graph(cnn_path.read_text(), weights={1: cnn_kernel.tobytes()})
    assert model.image == compile_graph(cnn_path).image


def test_read_weights(tmp_path):
    (tmp_path / "3.bin").write_bytes(b"abc")
    assert read_weights(tmp_path, [3]) == {3: b"abc"}
    with pytest.raises(PackError):
        read_weights(tmp_path, [4])


def test_load_model_errors(tmp_path, xgemm_path):
    with pytest.raises(PackError):
        load_model(tmp_path / "nowhere")
    out = tmp_path / "model"
    compile_graph(xgemm_path, out_dir=out)
    (out / "000.rcb").unlink()
    with pytest.raises(PackError):
        load_model(out)
    (out / "000.rcb").write_bytes(b"garbage")
    with pytest.raises(PackError):
        load_model(out)


def test_plan_bundle(cnn_path):
    model = compile_graph(cnn_path)
    bundle = model.plan_bundle()
    rcbs, manifest = decode_plan_bundle(bundle)
    assert rcbs == model.rcbs
    assert manifest.to_json() == model.manifest.to_json()
    assert encode_plan_bundle(rcbs, manifest) == bundle

    with pytest.raises(PackError):
        decode_plan_bundle(bundle[:-3])
    with pytest.raises(PackError):
        decode_plan_bundle(bundle + b"\0")


@pytest.mark.parametrize("entry", [{"size": -1}, {"alignment": 0}, {"alignment": 48}])
def test_manifest_rejects_bad_geometry(entry):
    doc = {"tensors": [{"tensor_id": 5, "size": 64, **entry}], "inputs": [], "outputs": []}
    with pytest.raises(ManifestError):
        MappingDescriptor.from_json(json.dumps(doc))
