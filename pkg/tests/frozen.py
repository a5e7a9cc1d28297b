"""Reference numbers, computed once from closed forms or independent quadrature and frozen.

Regenerate only if a physical convention changes deliberately.
"""

# sin(2.726e-3) * omega_p / c at 775 nm
K_DEG_2726URAD = 22100.57023765177
# 1 mm / 9.26e7 m/s
DELAY_1MM = 1.0799136069114472e-11
# 9.37 arcmin * v_g * omega_p / c
DETUNING_937ARCMIN = 2046231945963.6782
# 8 pi c / omega_p^2 * 1e12 rad/s
LAMBDA_1E12 = 1.275448199494994e-09
# 2 v_g cos(9.37') / 200 um
DELTA_OMEGA_FIG1 = 925996560366.7512
# scipy.integrate.quad of the two cat components' overlap
CAT_OVERLAP = 3.726999254522612e-06
# dominant period of the multibeam-oracle central row (tau = 0), 4096 samples over +-3e12 rad/s
CAT_FRINGE_PERIOD = 581822959454.1655
COMPASS_FRINGE_PERIOD = 516776032487.1466
# minimum of the compass oracle on its central row
COMPASS_CENTRAL_MIN = -0.8268104527707985
