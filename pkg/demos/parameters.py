"""
Choosing fabric width and oracle cardinality
============================================

"""

from wstack import analysis

# security of the default parameters, counted exactly and by the closed form
rep = analysis.security_report(4096, 31)
print(f"w=4096 kappa=31: {float(rep.exact_bits):.3f} exact bits, {rep.approx_bits:.3f} approx")
print(f"hors entropy after the collision correction: {float(rep.hors_entropy_bits):.3f}")

# how many signatures a 8192 deep fabric carries
cap = analysis.capacity(4096, 8192, 31)
print(f"capacity: about {cap.d_max:,} signatures, {cap.d_safe:,} with a 6 sigma margin")

# smallest kappa reaching 256 bits per width
for row in analysis.kappa_table(256):
    print(row.w, row.published, row.exact, row.approx, row.deviation or "")
