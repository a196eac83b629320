"""Common used strings."""
cli_version = "IteLab Cli {__version__}"
outside_domain = "Point {point} lies outside the {kind} domain."
not_symmetric = "{name} is not symmetric at {point} (relative asymmetry {asym:.3e})."
not_elliptic = "{name} leaves [{low:.3e}, {high:.3e}] at {point}: {value:.6e}."
bad_jacobian = "Jacobian determinant {det:.3e} is not positive at {point}."
boundary_moved = "Diffeomorphism moves boundary point {point} by {shift:.3e}."
newton_failed = "Newton inversion did not converge in {steps} steps (residual {residual:.3e})."
invalid_resolution = "Mesh resolution must be at least 1, got {n}."
min_angle_failed = "Minimum angle {angle:.2f} deg is below the {gate:.0f} deg gate."
strip_refine = "Strip meshes are rebuilt at the finer resolution rather than refined."
invalid_shift = "Variant {variant} needs a {kind} shift, got {gamma0}."
invalid_delta = "Regularization delta must lie in [0, 1), got {delta}."
div_load_variant = "A divergence load is only allowed for {expected}, got {variant}."
support_violation = "G1 is nonzero at {count} vertices inside the boundary band tau={tau}."
singular_pivot = "System is numerically singular: smallest pivot {pivot:.3e} against norm {norm:.3e}."
singular_exact = "System is exactly singular."
residual_too_large = "Relative residual {residual:.3e} exceeds {tol:.1e} after refinement."
rhs_size = "Right-hand side has length {got}, expected {expected}."
sweep_diverged = "Absorption sweep diverges: norm differences {history}."
sweep_order = "Delta schedule must be strictly decreasing in (0, 1): {schedule}."
zero_lambda = "The T3 operator needs a nonzero spectral parameter."
lambda_at_shift = "Initial guess coincides with the shift {lambda0}."
dropped_mu = "Dropped {count} zero Ritz values."
arnoldi_unconverged = "Arnoldi stopped after {restarts} restarts with {converged}/{k} converged Ritz values."
too_many_eigs = "Requested {k} eigenvalues but the operator has only {n} unknowns."
t3_oscillates = "Fixed point iteration oscillates between {a} and {b}."
mesh_mismatch = "Field has {got} nodal values, mesh has {expected}."
not_in_h10 = "Field does not vanish on the boundary nodes."
multiplier_residual = "Field does not solve the single field equation (relative residual {residual:.3e})."
degenerate_mode = "Mode matching denominator vanishes at xi={xi}: {condition} violated."
lattice_not_pow2 = "Lattice size {n} is not a power of two."
lam_below_one = "Half-space problems need lambda >= 1, got {lam}."
degenerate_media = "Disk media satisfy a1*s1 == a2*s2; every lambda is an eigenvalue."
grid_too_coarse = "Root count changed from {coarse} to {fine} for m={m} at step {step:.3e}."
unknown_key = "Unknown key {key}."
bad_value = "Cannot parse {value!r} for {key} as {kind}."
bad_line = "Expected 'key = value', got {text!r}."
unknown_preset = "Unknown preset {text!r}."
unknown_domain = "Unknown domain kind {kind!r}."
invalid_key_value = 'Invalid input format: "{value}". Use the format "section.key=value".'
report_written = "Wrote {path}."
command_failed = "{command} failed: {error}"
