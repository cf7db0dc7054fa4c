use pyo3::prelude::*;

#[pymodule]
fn jastrow_dyn_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
