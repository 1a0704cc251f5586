use pyo3::prelude::*;
use pyo3::types::PyDict;
use topolens_py::topolens_module;

const SCRIPT: &std::ffi::CStr = c"
import topolens as t

d = t.Diagram([(0.0, 1.0), (0.5, 0.7)])
assert len(d) == 2
assert d.points()[0] == (0.0, 1.0, 0, 'ordinary'), d.points()
assert t.Diagram.from_csv(d.to_csv()).points() == d.points()

g = t.sublevel_pd0([[0.0, 5.0, 1.0], [5.0, 5.0, 5.0]])
births = sorted(p[0] for p in g.points())
assert births == [0.0, 1.0], g.points()

assert t.wasserstein(d, d) == 0.0
assert abs(t.wasserstein(d, t.Diagram([(0.0, 1.0)])) - 0.2 / 2 ** 0.5) < 1e-12
assert t.betti_curve(d, 0, 3, 0.0, 1.0) == [1, 2, 0]

img = t.persistence_image(d, (4, 3), (0.0, 1.0, 0.0, 1.0), 0.1)
assert len(img) == 3 and len(img[0]) == 4

e = t.extended_pd_graph([0.0, 1.0, 2.0], [(0, 1), (1, 2), (0, 2)])
kinds = {p[3] for p in e.points()}
assert 'extended' in kinds, e.points()

try:
    t.Diagram.from_csv('birth,death\\n1,x\\n')
    raise AssertionError('no error')
except ValueError as exc:
    assert 'line 2' in str(exc)
try:
    t.Model.load(out + '/missing.bin')
    raise AssertionError('no error')
except OSError:
    pass

diagrams, labels, classes = t.synth('default', 0)
keep = [i for i in range(len(labels)) if i % 10 == 0]
model, losses = t.fit([diagrams[i] for i in keep], [labels[i] for i in keep], classes,
                      overrides=['train.epochs=2', 'arch.channels=[8,8]', 'arch.strides=[1,2]',
                                 'arch.simam_after=[1]', 'arch.embedding_dim=16', 'image.resolution=[8,8]'])
assert len(losses) == 2
assert model.classify(diagrams[0]) in classes
assert abs(sum(model.scores(diagrams[0])) - 1.0) < 1e-9
f = model.explain(diagrams[0], classes[1])
assert f.class_label == 1 and len(f.values()) == 8
assert f.lookup(0.1, 0.2) >= 0.0
f.render(out + '/field.png', 64, 64)
model.save(out + '/m.bin')
assert t.Model.load(out + '/m.bin').classes == classes

rows = t.grad_check([0], per_tensor=2)
assert all(r[4] < 1e-4 for r in rows), rows
";

#[test]
fn python_api_round_trip() {
    pyo3::append_to_inittab!(topolens_module);
    let dir = tempfile::tempdir().unwrap();
    Python::attach(|py| {
        let locals = PyDict::new(py);
        locals.set_item("out", dir.path().to_str().unwrap()).unwrap();
        if let Err(e) = py.run(SCRIPT, Some(&locals), None) {
            e.print(py);
            panic!("python script failed");
        }
    });
    assert!(dir.path().join("field.png").exists());
}
