config_template = '''# lbvar run configuration. Flat key: value pairs; command-line flags override them.
# Unknown keys are rejected.

# shared
out: lbvar-out            # output directory for the bundle
seed: 20240101            # master seed; equal seeds give byte-identical outputs
# threads: 8              # worker processes (default: every available core)
log_level: 1              # 0 = no logs, 1 = brief logs, 2 = verbose logs

# data (fit, forecast)
# data: data.csv          # CSV with a header row and a numeric body
# date_column: date       # optional label column, excluded from the model
# columns: gdp,cpi,ffr    # optional subset of variables, in order
transform: none           # none | diff | log | logdiff | pct, or per column: gdp=logdiff,ffr=none
frequency: ''

# model
# p: 1                    # lag order; required for forecast
intercept: false
nu_scheme: loss           # loss, or fixed:<int> (the conventional choice is fixed:m+1)
v0_scale: 10.0            # V0 = v0_scale * I
s0_scale: 1.0             # S0 = s0_scale * I

# Gibbs sampler (the desk study preset runs 2000 iterations, 500 burn-in unless set here)
# iterations: 6000
# burn_in: 1000
thin: 1
mh_step: 3                # nu proposals are uniform on +-1 .. +-mh_step

# forecast
# window: 40              # rolling window length R; required for forecast
# n_draws: 1000           # predictive draws per window (default: all retained draws)

# simulate
m: 3
T: 100
# nu_true: 10             # Sigma ~ IW(nu_true, Psi); default m + 1
coeff_diagonal: 0.5       # A_1 = coeff_diagonal * I

# study
preset: desk              # desk (m in 5, 10; 50 replications) or full (m in 5, 10, 20; 250)
# replications: 50
# study_m: 5,10
# study_T: 30,100

# verify
verify_m_max: 15
verify_k_max: 25
verify_c_max: 5
'''

