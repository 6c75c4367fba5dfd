//! Encodes an object cloud with a freshly initialized contact encoder and
//! runs the policy head on top, printing where its queries attend.
//!
//! cargo run --release --example policy_attention

use corn::encoder::{decode_contact, encode, EncoderConfig, EncoderParams, HandState};
use corn::geom::primitives::l_prism;
use corn::geom::{sample_surface_points, Pose, Rotation, Vec3};
use corn::nn::sigmoid;
use corn::patches::make_patches;
use corn::policyhead::{attention_map, policy_forward, PolicyConfig, PolicyParams, TaskInputs};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> corn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = EncoderConfig::default();
    let encoder = EncoderParams::new(cfg, &mut rng)?;
    let policy = PolicyParams::new(PolicyConfig::default(), &mut rng)?;
    println!(
        "encoder {} parameters, policy head ready ({} patches)",
        encoder.num_parameters(),
        cfg.patch.n_patches
    );

    let cloud = sample_surface_points(&l_prism(0.04, 0.05), cfg.patch.n_points, &mut rng)?;
    let centroid = cloud.centroid().expect("non-empty");
    let centered = cloud.transformed(&Pose::from_translation(-centroid));
    let patches = make_patches(&centered, &cfg.patch)?;
    let hand = Pose::new(Vec3::new(0.0, -0.08, 0.02), Rotation::identity());
    let e = encode(&encoder, &patches, &HandState::from_pose(&hand))?;

    let contact = decode_contact(&encoder, &e.patch_embeddings)?;
    let out = policy_forward(&policy, &e.patch_embeddings, &TaskInputs::default())?;
    let att = attention_map(&out.attention, cfg.patch.n_patches)?;
    println!("patch  center                      attention  p(contact)");
    for (i, c) in patches.centers.iter().enumerate() {
        println!(
            "{i:>5}  [{:+.3} {:+.3} {:+.3}]  {:>9.3}  {:>10.3}",
            c.x,
            c.y,
            c.z,
            att[i],
            sigmoid(contact[i])
        );
    }
    let a = out.action;
    println!(
        "value {:+.4}; action Δt = [{:+.4} {:+.4} {:+.4}], kp[0] {:.3}, rho[0] {:.3}",
        out.value, a.delta_translation[0], a.delta_translation[1], a.delta_translation[2], a.kp[0], a.rho[0]
    );
    Ok(())
}
