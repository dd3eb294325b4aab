use std::ffi::CString;

use pyo3::prelude::*;
use ustat_cs_py::ustat_cs_py as native;

fn with_module<F: FnOnce(Python<'_>)>(f: F) {
    static INIT: std::sync::Once = std::sync::Once::new();
    INIT.call_once(|| {
        pyo3::append_to_inittab!(native);
        Python::initialize();
    });
    Python::attach(f);
}

fn run(py: Python<'_>, code: &str) {
    let code = CString::new(format!("import math\nimport ustat_cs_py as us\n{code}")).unwrap();
    if let Err(e) = py.run(&code, None, None) {
        e.print(py);
        panic!("python snippet failed");
    }
}

#[test]
fn state_and_intervals() {
    with_module(|py| {
        run(
            py,
            r#"
st = us.UStatState("variance")
st.extend([1.0, 2.0, 4.0])
assert abs(st.ustat() - 7 / 3) < 1e-15
assert st.n == 3 and st.kernel == "variance"
rec = us.nondegenerate_cs(st, "gm", 0.05, 3)
a = us.g_inv(0.05)
assert abs(rec.half_width() - 2 * math.sqrt(st.jackknife_sigma2()) * a / math.sqrt(3)) < 1e-14
assert us.nondegenerate_cs(st, "gm", 0.05, 4) is None
assert us.sequential_test([rec], 100.0) == (True, 3)
"#,
        );
    });
}

#[test]
fn errors_become_value_errors() {
    with_module(|py| {
        run(
            py,
            r#"
for bad in (lambda: us.UStatState("nope"),
            lambda: us.gamma(10, "gm", 1.5, 5),
            lambda: us.gamma(10, "xx", 0.05, 5),
            lambda: us.SpectrumEstimate.from_eigenvalues([1.0], 1.0, "poly:1"),
            lambda: us.run_experiment("{}")):
    try:
        bad()
    except ValueError:
        pass
    else:
        raise AssertionError("no error")
"#,
        );
    });
}

#[test]
fn spectrum_single_eigenvalue() {
    with_module(|py| {
        run(
            py,
            r#"
single = us.SpectrumEstimate.from_eigenvalues([1.0], 1.0, "data", 0.05)
assert single.plus[0] == 1.0 and single.minus == (0.0, 0.0, 0.0)
a = us.g_inv(0.05)
want = (math.log(2.5) + a * a - 1.0) / 250
assert abs(us.sage_upper(250, single, "gm", 0.05, 100) - want) < 1e-14
"#,
        );
    });
}
