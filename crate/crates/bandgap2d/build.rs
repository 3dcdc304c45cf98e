fn main() {
    // LAPACK backend for the dense Hermitian eigensolver. OpenBLAS bundles
    // both BLAS and LAPACK; on Debian-family systems install
    // `libopenblas-dev`. Override the library name with BANDGAP2D_LAPACK_LIB
    // if your system provides the LAPACK symbols elsewhere.
    let lib = std::env::var("BANDGAP2D_LAPACK_LIB").unwrap_or_else(|_| "openblas".to_string());
    println!("cargo:rustc-link-lib=dylib={lib}");
    println!("cargo:rerun-if-env-changed=BANDGAP2D_LAPACK_LIB");
}
