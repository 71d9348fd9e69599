# 估计参数与基准场景配置
