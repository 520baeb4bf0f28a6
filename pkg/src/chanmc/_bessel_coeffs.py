"""Chebyshev coefficients for exp(x)*sqrt(2x/pi)*K_nu(x), x > 2, in t = 4/x - 1.

Generated by tools/gen_bessel_coeffs.py; do not edit by hand.
"""
K0_CHEB = (
    9.7354007643003678069e-1,
    -2.5091954503380809303e-2,
    1.2525861146772193004e-3,
    -1.025245722445174159e-4,
    1.1130340992367561545e-5,
    -1.4615294507429677033e-6,
    2.2075978855319633155e-7,
    -3.7185329351429390207e-8,
    6.8410893662933769909e-9,
    -1.3544365764715988642e-9,
    2.8543500586874655884e-10,
    -6.3491578109233727996e-11,
    1.4808331444582782408e-11,
    -3.6021279493778237835e-12,
    9.0986014938749799567e-13,
    -2.3777733246760546782e-13,
    6.4093195280428185646e-14,
    -1.777298492393498183e-14,
    5.0586491347305698614e-15,
    -1.4749641154455083119e-15,
    4.3979843802055255905e-16,
    -1.3390347046986471937e-16,
    4.1572911551159880588e-17,
    -1.3145791186184579352e-17,
)
K1_CHEB = (
    1.0853728165517261204,
    8.2919144915586496242e-2,
    -2.2802079498951452471e-3,
    1.557594482174180455e-4,
    -1.5448624702449027451e-5,
    1.9200971856838043251e-6,
    -2.7941602977436567974e-7,
    4.5807223859670149311e-8,
    -8.2547241410983378116e-9,
    1.6077770889213073168e-9,
    -3.3434193667657288495e-10,
    7.3551513648048494187e-11,
    -1.6994684532881865176e-11,
    4.100839143561441979e-12,
    -1.0286119996309397657e-12,
    2.6716523546317710857e-13,
    -7.1623744716049709125e-14,
    1.9764832698093293056e-14,
    -5.6010196328357905933e-15,
    1.6266497804027023957e-15,
    -4.8328245012991986051e-16,
    1.4665864849973658449e-16,
    -4.5395345666330931031e-17,
    1.4314456324007265505e-17,
)
