//! Quantizes a float tensor to 2, 4 and 8 bits, packs it into words, writes it
//! to disk and reads it back, then builds thresholds for requantizing a
//! row of convolution accumulators, next to a shift-and-clamp alternative.

use mpic::quant::{
    dequantize, golden_quant, make_thresholds, pack, quantize, read_tensor, unpack, write_tensor, AccTensor, QuantParams,
    Requant, ScaleClampParams,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let values: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin() * 1.5).collect();
    let dir = std::env::temp_dir();
    for bits in [2, 4, 8] {
        let p = QuantParams::new(-1.5, 1.5, bits, true)?;
        let q = quantize(&values, &[32], &p)?;
        let words = pack(&q.values(), bits)?;
        assert_eq!(words, q.data);
        assert_eq!(unpack(&words, bits, true)[..32], q.values()[..]);
        let path = dir.join(format!("mpic-example-{bits}.mpqt"));
        write_tensor(&path, &q)?;
        let back = read_tensor(&path)?;
        assert_eq!(back, q);
        std::fs::remove_file(&path)?;
        let err = dequantize(&q, &p)?
            .iter()
            .zip(&values)
            .map(|(d, v)| (d - v).abs())
            .fold(0.0, f64::max);
        assert!(err <= p.eps);
        println!("{bits}-bit: {} words, max error {err:.4} (step {:.4})", words.len(), p.eps);
    }

    // Accumulators in [0, 400) mapped to 4-bit codes, one channel.
    let phi = AccTensor { shape: [1, 11, 1], data: (0..400).step_by(37).collect() };
    let p = QuantParams::new(0.0, 400.0, 4, false)?;
    let by_threshold = golden_quant(&phi, &Requant::Thresholds(make_thresholds(&p, 4)?), 4, false)?;
    let shift = ScaleClampParams::new(vec![0], 5, 0, 15)?;
    let by_shift = golden_quant(&phi, &Requant::ScaleClamp(shift), 4, false)?;
    println!("phi        {:?}", phi.data);
    println!("thresholds {:?}", by_threshold.values());
    println!("shift 5    {:?}", by_shift.values());
    Ok(())
}
