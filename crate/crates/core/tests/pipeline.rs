//! End-to-end use of the public API outside the acceptance suite.

use curlra::cur::{evaluate, LowRank};
use curlra::experiment::{run, write_csv, CSV_HEADER};
use curlra::linalg::{read_matrix_text, write_matrix_text};
use curlra::{
    AlgoConfig, Class2Kind, Driver, ExperimentSpec, Family, MatrixOracle, MatrixSpec, OracleMatrix, TestId,
};

#[test]
fn text_round_trip_then_cur() {
    let m = curlra::testmatrices::gen_class2(Class2Kind::Gravity, 40).unwrap().to_dense();
    let mut buf = Vec::new();
    write_matrix_text(&m, &mut buf).unwrap();
    let back = read_matrix_text(buf.as_slice()).unwrap();
    assert_eq!(back, m);

    let o = OracleMatrix::from_dense(back).unwrap();
    let f = Driver::CrossApproximation.run(&o, &AlgoConfig::tests2(10)).unwrap();
    let sv = curlra::linalg::singular_values(&m).unwrap();
    // Within a modest factor of the best rank-10 error.
    assert!(evaluate(&f, &m).unwrap().spectral_rel <= 10.0 * sv[10] / sv[0]);
    assert_eq!(f.reconstruct().shape(), (40, 40));
    assert!(o.access_count() < 40 * 40);
}

#[test]
fn experiment_rows_are_reproducible() {
    let spec = ExperimentSpec::new(TestId::T3, MatrixSpec::square(Family::Class1, 96, 4, 0), 8, 42);
    let (a, row_a) = run(&spec).unwrap();
    let (b, row_b) = run(&spec).unwrap();
    assert_eq!(a, b);
    let mut csv = Vec::new();
    write_csv(&[row_a, row_b], &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines[1], lines[2]);
    assert!(a.min <= a.mean && a.mean <= a.max && a.std >= 0.0);
}

#[test]
fn family_strings_round_trip() {
    for s in ["class1", "class2:baart", "class2:inverse_laplace", "class3", "delta", "gaussian"] {
        let f: Family = s.parse().unwrap();
        assert_eq!(f.to_string(), s);
    }
}
