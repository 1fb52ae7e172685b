//! Evaluate the segmentation losses on a small batch and check their
//! gradients against central differences.

use frameseg::losses::{
    bce_loss_with_grad, combined_loss, generalized_dice_loss_with_grad, grad_check, tversky_loss_with_grad,
    LossWeights, SegBatch, DEFAULT_POS_WEIGHT, EPSILON,
};

fn main() -> frameseg::Result<()> {
    let probs = vec![0.9, 0.7, 0.2, 0.4, 0.1, 0.6];
    let labels = vec![1.0, 1.0, 0.0, 1.0, 0.0, 0.0];
    let batch = SegBatch::new(probs.clone(), labels.clone(), 2, 3)?;

    let (bce, _) = bce_loss_with_grad(&batch, DEFAULT_POS_WEIGHT, EPSILON);
    let (tv, _) = tversky_loss_with_grad(&batch, 0.3, 0.7, EPSILON);
    let (gd, _) = generalized_dice_loss_with_grad(&batch, EPSILON);
    println!("bce {bce:.6}  tversky {tv:.6}  gdl {gd:.6}");
    for (name, w) in [("lm only", LossWeights::LM_ONLY), ("warm", LossWeights::WARM)] {
        println!("{name:>8}: total {:.6} with lm = 1", combined_loss(1.0, bce, tv, gd, &w));
    }

    let at = |x: &[f64]| SegBatch::new(x.to_vec(), labels.clone(), 2, 3).unwrap();
    let reports = [
        ("bce", grad_check(|x| bce_loss_with_grad(&at(x), DEFAULT_POS_WEIGHT, EPSILON), &probs, 1e-6)?),
        ("tversky", grad_check(|x| tversky_loss_with_grad(&at(x), 0.3, 0.7, EPSILON), &probs, 1e-6)?),
        ("gdl", grad_check(|x| generalized_dice_loss_with_grad(&at(x), EPSILON), &probs, 1e-6)?),
    ];
    for (name, r) in reports {
        println!("{name:>8}: max relative error {:.2e} (coordinate {})", r.max_rel_error, r.worst_index);
    }
    Ok(())
}
